"""Bundled synthetic traces, experiment presets and golden reports."""

import difflib
import logging
from dataclasses import dataclass
from importlib import resources

from c2tcp_lab.traces import (
    DEFAULT_MTU, gen_constant_trace, gen_on_off_trace, gen_random_walk_trace, gen_step_trace,
    parse_trace,
)

log = logging.getLogger(__name__)

PRESETS = ("head-to-head", "codel-comparison", "fairness", "loss-sweep", "target-sweep",
           "interval-sweep")

CORPUS_SEED = 2018


def corpus_generators():
    """Recipes for the bundled trace files, by corpus name."""
    return {
        "constant-24": lambda: gen_constant_trace(24, 1000),
        "constant-12": lambda: gen_constant_trace(12, 1000),
        "step-24-2.4": lambda: gen_step_trace([(24, 10_000), (2.4, 10_000)]),
        "on-off": lambda: gen_on_off_trace(12.0, on_ms=4000, off_ms=1000, cycles=5),
        "random-walk": lambda: gen_random_walk_trace(CORPUS_SEED, duration_ms=60_000),
    }


def _data(*parts):
    return resources.files("c2tcp_lab").joinpath("data", *parts)


def corpus_names():
    return sorted(corpus_generators())


def load_corpus_trace(name, mtu_bytes=DEFAULT_MTU):
    path = _data("traces", f"{name}.trace")
    if not path.is_file():
        raise FileNotFoundError(f"no bundled trace named {name!r}; available: {', '.join(corpus_names())}")
    return parse_trace(path.read_text(encoding="utf-8"), mtu_bytes)


def preset_path(preset_id):
    if preset_id not in PRESETS:
        raise KeyError(f"unknown preset {preset_id!r}; available: {', '.join(PRESETS)}")
    return _data("presets", f"{preset_id}.toml")


def load_preset(preset_id):
    from c2tcp_lab.scenario import load_config

    path = preset_path(preset_id)
    return load_config(path.read_text(encoding="utf-8"), base_dir=str(path.parent))


def preset_csv(preset_id):
    """Run a preset (a sweep when it declares one) and render its metrics CSV."""
    from c2tcp_lab.report import reports_csv
    from c2tcp_lab.scenario import run_scenario, sweep

    cfg = load_preset(preset_id)
    if cfg.sweep_key is not None:
        reports = sweep(cfg, cfg.sweep_key, cfg.sweep_values)
    else:
        reports = [run_scenario(cfg)]
    return reports_csv(reports), reports


@dataclass
class GoldenResult:
    preset_id: str
    passed: bool
    diff: str = ""


def golden_path(preset_id):
    return _data("golden", f"{preset_id}.csv")


def verify_golden(preset_id, fresh_csv=None):
    """Byte-compare a fresh run of ``preset_id`` against its stored golden CSV."""
    path = golden_path(preset_id)
    if not path.is_file():
        raise FileNotFoundError(f"no golden report for preset {preset_id!r}")
    expected = path.read_text(encoding="utf-8")
    if fresh_csv is None:
        fresh_csv, _ = preset_csv(preset_id)
    if fresh_csv == expected:
        return GoldenResult(preset_id, True)
    diff = "".join(difflib.unified_diff(
        expected.splitlines(True), fresh_csv.splitlines(True), "golden", "fresh"))
    return GoldenResult(preset_id, False, diff)


def refresh_golden(preset_id, target_dir=None):
    """Rewrite the golden CSV of ``preset_id`` from a fresh run."""
    csv_text, _ = preset_csv(preset_id)
    path = golden_path(preset_id) if target_dir is None else target_dir / f"{preset_id}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text)
    log.warning("golden report for %s refreshed at %s", preset_id, path)
    return path


def regenerate_corpus(target_dir=None):
    """Write every bundled trace file from its recipe."""
    from c2tcp_lab.traces import write_trace

    written = []
    for name, make in corpus_generators().items():
        path = (_data("traces") if target_dir is None else target_dir) / f"{name}.trace"
        write_trace(make(), path)
        written.append(path)
    return written
