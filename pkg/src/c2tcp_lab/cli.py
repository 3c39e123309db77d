"""Command-line entry point: run, sweep and validate scenario files.

Exit status is 0 on success, 1 for a bad scenario or bad arguments, and 2
when a simulation fails at run time.
"""

import argparse
import logging
import sys

from c2tcp_lab import corpus, report
from c2tcp_lab.scenario import ConfigError, load_config_file, run_scenario, sweep

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

FORMATS = ("csv", "json", "svg")

log = logging.getLogger("c2tcp_lab")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; here 2 means a failed simulation
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _load(spec):
    """A scenario file path, or ``preset:<name>`` for a bundled preset."""
    if spec.startswith("preset:"):
        try:
            return corpus.load_preset(spec.partition(":")[2])
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from exc
    return load_config_file(spec)


def _values(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(int(part) if part.lstrip("-").isdigit() else float(part))
        except ValueError:
            raise ConfigError(f"sweep value {part!r} is not a number") from None
    if not out:
        raise ConfigError("--values needs at least one number")
    return out


def _emit(reports, args):
    if args.out is None:
        if args.format == "svg":
            raise ConfigError("--format svg needs --out DIR")
        text = report.reports_json(reports) if args.format == "json" else report.reports_csv(reports)
        sys.stdout.write(text)
        return
    for path in report.emit(reports, args.out, args.format):
        print(path)


def cmd_run(args):
    cfg = _load(args.scenario)
    if args.seed is not None:
        cfg.seed = args.seed
    _emit([run_scenario(cfg)], args)


def cmd_sweep(args):
    cfg = _load(args.scenario)
    if args.seed is not None:
        cfg.seed = args.seed
    key = args.key or cfg.sweep_key
    if key is None:
        raise ConfigError("no --key given and the scenario has no [sweep] table")
    if args.values is not None:
        values = _values(args.values)
    elif key == cfg.sweep_key:
        values = cfg.sweep_values
    else:
        raise ConfigError(f"no --values given for {key}")
    _emit(sweep(cfg, key, values, jobs=args.jobs), args)


def cmd_validate(args):
    cfg = _load(args.scenario)
    if args.echo:
        sys.stdout.write(cfg.to_toml())
    else:
        print(f"{args.scenario}: ok ({len(cfg.flows)} flows, {cfg.duration_s:g} s)")


def cmd_golden(args):
    names = args.presets or list(corpus.PRESETS)
    for name in names:
        if name not in corpus.PRESETS:
            raise ConfigError(f"unknown preset {name!r}; available: {', '.join(corpus.PRESETS)}")
    failed = 0
    for name in names:
        if args.refresh:
            corpus.refresh_golden(name)
            print(f"{name}: refreshed")
            continue
        result = corpus.verify_golden(name)
        print(f"{name}: {'ok' if result.passed else 'MISMATCH'}")
        if not result.passed:
            failed += 1
            sys.stdout.write(result.diff)
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser():
    p = _Parser(prog="c2tcp-lab", description="Trace-driven congestion-control lab.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def outputs(sp):
        sp.add_argument("--out", metavar="DIR", help="write files here instead of printing")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--format", choices=FORMATS, default="csv")

    sp = sub.add_parser("run", help="run one scenario")
    sp.add_argument("scenario", help="scenario file, or preset:<name>")
    outputs(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run a scenario once per parameter value")
    sp.add_argument("scenario")
    sp.add_argument("--key", help="c2tcp.target_ms, c2tcp.interval_ms or loss_prob")
    sp.add_argument("--values", help="comma-separated, e.g. 50,75,100")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    outputs(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="check a scenario without running it")
    sp.add_argument("scenario")
    sp.add_argument("--echo", action="store_true", help="print the fully resolved scenario")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("golden", help="compare presets against their stored reports")
    sp.add_argument("presets", nargs="*")
    sp.add_argument("--refresh", action="store_true", help="overwrite the stored reports")
    sp.set_defaults(func=cmd_golden)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a failed run
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
