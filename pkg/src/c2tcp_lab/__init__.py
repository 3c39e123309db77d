"""Trace-driven congestion-control laboratory with a C2TCP overlay."""

from c2tcp_lab.c2tcp import C2tcp, C2tcpConfig, ConditionState
from c2tcp_lab.cca import AckSample, Cubic, CwndState, NewReno, Vegas, make_controller
from c2tcp_lab.metrics import FlowMetrics, PacketRecord, jain_index, percentile, throughput
from c2tcp_lab.scenario import ConfigError, RunReport, ScenarioConfig, load_config, run_scenario, sweep
from c2tcp_lab.traces import LinkTrace, gen_constant_trace, gen_step_trace, parse_trace

__version__ = "0.1.0"

__all__ = [
    "AckSample",
    "C2tcp",
    "C2tcpConfig",
    "ConditionState",
    "ConfigError",
    "Cubic",
    "CwndState",
    "FlowMetrics",
    "LinkTrace",
    "NewReno",
    "PacketRecord",
    "RunReport",
    "ScenarioConfig",
    "Vegas",
    "gen_constant_trace",
    "gen_step_trace",
    "jain_index",
    "load_config",
    "make_controller",
    "parse_trace",
    "percentile",
    "run_scenario",
    "sweep",
    "throughput",
]
