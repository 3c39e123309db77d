"""Scenario files, simulation wiring and parameter sweeps.

A scenario is a TOML document. Top-level keys::

    name                   free-form label
    trace                  trace file path, or corpus:<name>, constant:<mbps>,
                           step:<mbps>x<ms>,<mbps>x<ms>,...
    uplink_trace           optional; acks then queue on a trace-driven uplink
    duration_s             required; simulated seconds
    seed                   RNG seed (default 1)
    warmup_s               metrics ignore deliveries before this (default 0)
    one_way_prop_delay_ms  each direction (default 20, i.e. a 40 ms RTT)
    queue_cap              packets, "bdp" or "unlimited" (default "unlimited")
    loss_prob              Bernoulli loss applied at dequeue (default 0)
    aqm                    "droptail" or "codel" (default "droptail")
    mtu_bytes              default 1500
    initial_cwnd           segments (default 10)
    timeseries_bin_ms      bin width of the throughput series (default 1000)
    [codel]                target_ms (5), interval_ms (100)
    [c2tcp]                target_ms (100), interval_ms (100), base ("cubic")
    [[flows]]              algorithm, start_s (0), queue (1), aqm, [flows.c2tcp]
    [sweep]                key, values: defaults for the ``sweep`` command

Flows with the same ``queue`` share one bottleneck queue (one receiving UE);
different queues are isolated and each is served by its own copy of the trace.
"""

import copy
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from c2tcp_lab import corpus
from c2tcp_lab.c2tcp import C2tcp, C2tcpConfig
from c2tcp_lab.cca import ALGORITHMS, make_controller
from c2tcp_lab.flow import AckPath, BulkSender
from c2tcp_lab.link import BottleneckLink, CodelState
from c2tcp_lab.metrics import PacketRecord, flow_metrics, timeseries_throughput
from c2tcp_lab.sim import SeededRng, Simulator, ms, seconds
from c2tcp_lab.traces import (
    DEFAULT_MTU, TraceError, gen_constant_trace, gen_random_walk_trace, gen_step_trace, load_trace,
)

log = logging.getLogger(__name__)

AQMS = ("droptail", "codel")
SWEEP_KEYS = ("c2tcp.target_ms", "c2tcp.interval_ms", "loss_prob")

_TOP_KEYS = {
    "name", "trace", "uplink_trace", "duration_s", "seed", "warmup_s", "one_way_prop_delay_ms",
    "queue_cap", "loss_prob", "aqm", "mtu_bytes", "initial_cwnd", "timeseries_bin_ms",
    "codel", "c2tcp", "flows", "sweep",
}
_CODEL_KEYS = {"target_ms", "interval_ms"}
_C2TCP_KEYS = {"target_ms", "interval_ms", "base"}
_FLOW_KEYS = {"algorithm", "start_s", "queue", "aqm", "c2tcp"}
_SWEEP_TABLE_KEYS = {"key", "values"}


class ConfigError(ValueError):
    """Invalid scenario description."""


@dataclass
class FlowSpec:
    algorithm: str
    start_s: float = 0.0
    queue: int = 1
    aqm: str = None
    c2tcp: dict = field(default_factory=dict)


@dataclass
class ScenarioConfig:
    trace: str
    flows: list
    duration_s: float
    name: str = "scenario"
    uplink_trace: str = None
    seed: int = 1
    warmup_s: float = 0.0
    one_way_prop_delay_ms: float = 20.0
    queue_cap: object = "unlimited"
    loss_prob: float = 0.0
    aqm: str = "droptail"
    mtu_bytes: int = DEFAULT_MTU
    initial_cwnd: float = 10.0
    timeseries_bin_ms: float = 1000.0
    codel_target_ms: float = 5.0
    codel_interval_ms: float = 100.0
    c2tcp_target_ms: float = 100.0
    c2tcp_interval_ms: float = 100.0
    c2tcp_base: str = "cubic"
    sweep_key: str = None
    sweep_values: list = None
    base_dir: str = "."

    def validate(self):
        if not self.flows:
            raise ConfigError("at least one [[flows]] entry is required")
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if not 0 <= self.warmup_s < self.duration_s:
            raise ConfigError("warmup_s must be in [0, duration_s)")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError("loss_prob must be within [0, 1]")
        if self.one_way_prop_delay_ms < 0:
            raise ConfigError("one_way_prop_delay_ms must be non-negative")
        if self.aqm not in AQMS:
            raise ConfigError(f"aqm must be one of {AQMS}, got {self.aqm!r}")
        if not (self.queue_cap in ("bdp", "unlimited")
                or (isinstance(self.queue_cap, int) and self.queue_cap > 0)):
            raise ConfigError(f"queue_cap must be a positive integer, 'bdp' or 'unlimited', got {self.queue_cap!r}")
        if self.c2tcp_base not in ("newreno", "cubic"):
            raise ConfigError(f"c2tcp.base must be newreno or cubic, got {self.c2tcp_base!r}")
        for name, value in (("c2tcp.target_ms", self.c2tcp_target_ms),
                            ("c2tcp.interval_ms", self.c2tcp_interval_ms),
                            ("codel.target_ms", self.codel_target_ms),
                            ("codel.interval_ms", self.codel_interval_ms),
                            ("timeseries_bin_ms", self.timeseries_bin_ms),
                            ("mtu_bytes", self.mtu_bytes),
                            ("initial_cwnd", self.initial_cwnd)):
            if not value > 0:
                raise ConfigError(f"{name} must be positive")
        for i, f in enumerate(self.flows, 1):
            if f.algorithm not in ALGORITHMS and f.algorithm != "c2tcp":
                raise ConfigError(f"flow {i}: unknown algorithm {f.algorithm!r}")
            if not 0 <= f.start_s < self.duration_s:
                raise ConfigError(f"flow {i}: start_s {f.start_s} must be before duration_s {self.duration_s}")
            if f.aqm is not None and f.aqm not in AQMS:
                raise ConfigError(f"flow {i}: aqm must be one of {AQMS}")
            for key, value in f.c2tcp.items():
                if key == "base":
                    if value not in ("newreno", "cubic"):
                        raise ConfigError(f"flow {i}: c2tcp.base must be newreno or cubic")
                elif isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                    raise ConfigError(f"flow {i}: c2tcp.{key} must be a positive number")
        queue_aqm = {}
        for i, f in enumerate(self.flows, 1):
            if f.aqm is not None and queue_aqm.setdefault(f.queue, f.aqm) != f.aqm:
                raise ConfigError(f"flow {i}: conflicting aqm for queue {f.queue}")
        if self.sweep_key is not None:
            _check_sweep(self.sweep_key, self.sweep_values)
        return self

    def c2tcp_config(self, flow):
        overrides = flow.c2tcp
        base = overrides.get("base", self.c2tcp_base)
        if "+" in flow.algorithm:
            base = flow.algorithm.partition("+")[2]
        return C2tcpConfig(
            target=ms(overrides.get("target_ms", self.c2tcp_target_ms)),
            interval=ms(overrides.get("interval_ms", self.c2tcp_interval_ms)),
            base_algorithm=base,
        )

    def queue_aqm(self, queue):
        for f in self.flows:
            if f.queue == queue and f.aqm is not None:
                return f.aqm
        return self.aqm

    def with_override(self, key, value):
        """Copy with one sweepable parameter replaced."""
        _check_sweep(key, [value])
        cfg = copy.deepcopy(self)
        if key == "loss_prob":
            cfg.loss_prob = float(value)
        else:
            attr = key.partition(".")[2]
            setattr(cfg, "c2tcp_" + attr, float(value))
            for f in cfg.flows:
                f.c2tcp.pop(attr, None)
        return cfg.validate()

    def to_dict(self):
        doc = {
            "name": self.name,
            "trace": _absolute_trace_spec(self.trace, self.base_dir),
            "duration_s": self.duration_s,
            "seed": self.seed,
            "warmup_s": self.warmup_s,
            "one_way_prop_delay_ms": self.one_way_prop_delay_ms,
            "queue_cap": self.queue_cap,
            "loss_prob": self.loss_prob,
            "aqm": self.aqm,
            "mtu_bytes": self.mtu_bytes,
            "initial_cwnd": self.initial_cwnd,
            "timeseries_bin_ms": self.timeseries_bin_ms,
            "codel": {"target_ms": self.codel_target_ms, "interval_ms": self.codel_interval_ms},
            "c2tcp": {"target_ms": self.c2tcp_target_ms, "interval_ms": self.c2tcp_interval_ms,
                      "base": self.c2tcp_base},
        }
        if self.uplink_trace:
            doc["uplink_trace"] = _absolute_trace_spec(self.uplink_trace, self.base_dir)
        flows = []
        for f in self.flows:
            entry = {"algorithm": f.algorithm, "start_s": f.start_s, "queue": f.queue}
            if f.aqm is not None:
                entry["aqm"] = f.aqm
            if f.c2tcp:
                entry["c2tcp"] = dict(f.c2tcp)
            flows.append(entry)
        doc["flows"] = flows
        if self.sweep_key is not None:
            doc["sweep"] = {"key": self.sweep_key, "values": list(self.sweep_values)}
        return doc

    def to_toml(self):
        return tomli_w.dumps(self.to_dict())


def _check_sweep(key, values):
    if key not in SWEEP_KEYS:
        raise ConfigError(f"cannot sweep {key!r}; choose one of {', '.join(SWEEP_KEYS)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"sweep value {v!r} is not a number")
        if key == "loss_prob" and not 0 <= v <= 1:
            raise ConfigError(f"loss_prob {v} outside [0, 1]")
        if key != "loss_prob" and not v > 0:
            raise ConfigError(f"{key} must be positive, got {v}")


def _absolute_trace_spec(spec, base_dir):
    if spec is None or ":" in spec.split(os.sep)[0] or os.path.isabs(spec):
        return spec
    return os.path.normpath(os.path.join(base_dir, spec))


def _number(table, key, default, where, kind=float):
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{where}{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _check_keys(table, allowed, where):
    if not isinstance(table, dict):
        raise ConfigError(f"{where or 'scenario'} must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'scenario'}: {', '.join(unknown)}")


def load_config(text, base_dir="."):
    """Parse and validate a scenario document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc
    _check_keys(doc, _TOP_KEYS, "")
    for required in ("trace", "duration_s", "flows"):
        if required not in doc:
            raise ConfigError(f"missing required key {required!r}")
    if not isinstance(doc["trace"], str):
        raise ConfigError("trace must be a string")
    codel = doc.get("codel", {})
    _check_keys(codel, _CODEL_KEYS, "[codel]")
    c2 = doc.get("c2tcp", {})
    _check_keys(c2, _C2TCP_KEYS, "[c2tcp]")
    sweep_table = doc.get("sweep")
    if sweep_table is not None:
        _check_keys(sweep_table, _SWEEP_TABLE_KEYS, "[sweep]")
    if not isinstance(doc["flows"], list):
        raise ConfigError("flows must be an array of tables ([[flows]])")
    flows = []
    for i, entry in enumerate(doc["flows"], 1):
        where = f"flows[{i}]."
        _check_keys(entry, _FLOW_KEYS, f"[[flows]] #{i}")
        if "algorithm" not in entry:
            raise ConfigError(f"flow {i}: missing algorithm")
        fc2 = entry.get("c2tcp", {})
        _check_keys(fc2, _C2TCP_KEYS, f"[flows.c2tcp] #{i}")
        flows.append(FlowSpec(
            algorithm=str(entry["algorithm"]),
            start_s=_number(entry, "start_s", 0.0, where),
            queue=_number(entry, "queue", 1, where, int),
            aqm=entry.get("aqm"),
            c2tcp=dict(fc2),
        ))
    queue_cap = doc.get("queue_cap", "unlimited")
    if isinstance(queue_cap, float) and queue_cap.is_integer():
        queue_cap = int(queue_cap)
    cfg = ScenarioConfig(
        name=str(doc.get("name", "scenario")),
        trace=doc["trace"],
        uplink_trace=doc.get("uplink_trace"),
        flows=flows,
        duration_s=_number(doc, "duration_s", None, ""),
        seed=_number(doc, "seed", 1, "", int),
        warmup_s=_number(doc, "warmup_s", 0.0, ""),
        one_way_prop_delay_ms=_number(doc, "one_way_prop_delay_ms", 20.0, ""),
        queue_cap=queue_cap,
        loss_prob=_number(doc, "loss_prob", 0.0, ""),
        aqm=doc.get("aqm", "droptail"),
        mtu_bytes=_number(doc, "mtu_bytes", DEFAULT_MTU, "", int),
        initial_cwnd=_number(doc, "initial_cwnd", 10.0, ""),
        timeseries_bin_ms=_number(doc, "timeseries_bin_ms", 1000.0, ""),
        codel_target_ms=_number(codel, "target_ms", 5.0, "codel."),
        codel_interval_ms=_number(codel, "interval_ms", 100.0, "codel."),
        c2tcp_target_ms=_number(c2, "target_ms", 100.0, "c2tcp."),
        c2tcp_interval_ms=_number(c2, "interval_ms", 100.0, "c2tcp."),
        c2tcp_base=c2.get("base", "cubic"),
        sweep_key=sweep_table.get("key") if sweep_table else None,
        sweep_values=list(sweep_table.get("values", [])) if sweep_table else None,
        base_dir=str(base_dir),
    )
    return cfg.validate()


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    return load_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def resolve_trace(spec, base_dir=".", mtu_bytes=DEFAULT_MTU):
    """Turn a trace spec string into a :class:`LinkTrace`."""
    kind, sep, arg = spec.partition(":")
    if sep and kind == "corpus":
        return corpus.load_corpus_trace(arg, mtu_bytes)
    if sep and kind == "constant":
        return gen_constant_trace(float(arg), 1000, mtu_bytes)
    if sep and kind == "step":
        steps = []
        for part in arg.split(","):
            rate, _, duration = part.partition("x")
            steps.append((float(rate), int(duration)))
        return gen_step_trace(steps, mtu_bytes)
    if sep and kind == "randomwalk":
        return gen_random_walk_trace(int(arg), mtu_bytes=mtu_bytes)
    return load_trace(os.path.join(base_dir, spec), mtu_bytes)


def resolve_queue_cap(cfg, trace):
    if cfg.queue_cap == "unlimited":
        return None
    if cfg.queue_cap == "bdp":
        rtt_s = 2 * cfg.one_way_prop_delay_ms / 1000.0
        return max(1, round(trace.mean_rate_mbps * 1e6 * rtt_s / (8 * cfg.mtu_bytes)))
    return int(cfg.queue_cap)


class World:
    """Every simulated entity of one scenario, wired and ready to run."""

    def __init__(self, cfg):
        self.cfg = cfg
        try:
            self.trace = resolve_trace(cfg.trace, cfg.base_dir, cfg.mtu_bytes)
            uplink_trace = (resolve_trace(cfg.uplink_trace, cfg.base_dir, cfg.mtu_bytes)
                            if cfg.uplink_trace else None)
        except (OSError, TraceError, ValueError) as exc:
            raise RuntimeError(f"cannot load trace: {exc}") from exc
        self.sim = Simulator()
        self.rng = SeededRng(cfg.seed)
        self.prop = ms(cfg.one_way_prop_delay_ms)
        self.queue_cap = resolve_queue_cap(cfg, self.trace)
        uplink = None
        if uplink_trace is not None:
            uplink = BottleneckLink(self.sim, uplink_trace, one_way_prop_delay=self.prop, name="uplink")
        self.ack_path = AckPath(self.sim, self.prop, uplink)
        self.links = {}
        self.senders = []
        for flow_id, f in enumerate(cfg.flows, 1):
            link = self.links.get(f.queue)
            if link is None:
                aqm = None
                if cfg.queue_aqm(f.queue) == "codel":
                    aqm = CodelState(ms(cfg.codel_target_ms), ms(cfg.codel_interval_ms), cfg.mtu_bytes)
                link = BottleneckLink(
                    self.sim, self.trace, self.queue_cap, aqm, self.prop, cfg.loss_prob,
                    self.rng.spawn(f"loss:{f.queue}"), self.ack_path.on_data_forwarded,
                    name=f"queue-{f.queue}",
                )
                self.links[f.queue] = link
            algorithm = f.algorithm
            if algorithm == "c2tcp":
                algorithm = f"c2tcp+{cfg.c2tcp_config(f).base_algorithm}"
            c2cfg = cfg.c2tcp_config(f) if algorithm.startswith("c2tcp") else None
            controller = make_controller(algorithm, c2cfg)
            sender = BulkSender(self.sim, flow_id, controller, link, cfg.mtu_bytes,
                                seconds(f.start_s), cfg.initial_cwnd, algorithm)
            self.ack_path.register(sender)
            self.senders.append(sender)

    def run(self, until=None):
        end = seconds(self.cfg.duration_s) if until is None else until
        return self.sim.run_until(end)

    def conservation_ok(self):
        """Per-flow packet conservation at the current instant."""
        now = self.sim.now
        for s in self.senders:
            link = s.link
            c = link.counters.get(s.flow_id)
            if c is None:
                if s.tx_count:
                    return False
                continue
            if not c.balanced() or c.enqueued != s.tx_count:
                return False
            queued = sum(1 for p in link.queue if p.flow_id == s.flow_id)
            fates = {"delivered": 0, "in-network": 0, "dropped": 0}
            for p in s.records:
                if p.fate is None:
                    fates["in-network"] += 1
                elif p.fate == "delivered":
                    fates["delivered" if p.delivered_at <= now else "in-network"] += 1
                else:
                    fates["dropped"] += 1
            if queued != c.queued or len(s.records) != sum(fates.values()):
                return False
            if fates["dropped"] != c.aqm_drops + c.tail_drops + c.stochastic_losses:
                return False
        return True


@dataclass
class RunReport:
    flows: list
    aggregate: object
    digest: str
    config: ScenarioConfig
    timeseries: dict
    flow_stats: dict
    link_counters: dict
    events: int
    wall_s: float
    sweep_key: str = None
    sweep_value: float = None

    def flow(self, flow_id):
        for fm in self.flows:
            if fm.flow_id == flow_id:
                return fm
        raise KeyError(flow_id)


def _records(world):
    return [[PacketRecord.from_packet(p) for p in s.records] for s in world.senders]


def run_scenario(cfg, keep_records=False):
    """Run one scenario to completion and summarise it."""
    t0 = time.perf_counter()
    world = World(cfg)
    events = world.run()
    end = seconds(cfg.duration_s)
    start = seconds(cfg.warmup_s)
    per_flow = _records(world)
    flows = []
    flow_stats = {}
    for sender, records in zip(world.senders, per_flow):
        flows.append(flow_metrics(records, world.prop, start, end, sender.flow_id, sender.algorithm))
        stats = {"loss_events": sender.loss_events, "timeouts": sender.timeouts, "acks": sender.acks,
                 "transmissions": sender.tx_count}
        if isinstance(sender.controller, C2tcp):
            stats["c2tcp_branches"] = dict(sender.controller.branch_counts)
        flow_stats[sender.flow_id] = stats
    everything = [r for records in per_flow for r in records]
    aggregate = flow_metrics(everything, world.prop, start, end, "all", "*")
    series = timeseries_throughput(everything, ms(cfg.timeseries_bin_ms), 0, end)
    link_counters = {
        name: {fid: c.as_dict() for fid, c in link.counters.items()}
        for name, link in ((f"queue-{q}", l) for q, l in world.links.items())
    }
    report = RunReport(
        flows=flows, aggregate=aggregate, digest=world.sim.digest(), config=cfg,
        timeseries=series, flow_stats=flow_stats, link_counters=link_counters,
        events=events, wall_s=time.perf_counter() - t0,
    )
    if keep_records:
        report.records = per_flow
    log.info("%s: %d events in %.2fs, digest %s", cfg.name, events, report.wall_s, report.digest[:12])
    return report


def _run_override(args):
    cfg, key, value = args
    report = run_scenario(cfg.with_override(key, value))
    report.sweep_key = key
    report.sweep_value = value
    return report


def sweep(base_cfg, key, values, jobs=1):
    """One run per value of ``key``, all sharing the base seed."""
    values = list(values)
    _check_sweep(key, values)
    tasks = [(base_cfg, key, v) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_override, tasks))
    return [_run_override(t) for t in tasks]
