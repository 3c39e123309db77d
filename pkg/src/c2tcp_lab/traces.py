"""Mahimahi-format capacity traces.

A trace file lists, one per line, the millisecond offsets at which the link
may deliver one MTU-sized packet. The list repeats with a period equal to its
last value, so opportunity ``i`` of cycle ``k`` fires at ``k * period + t_i``.
"""

import math
from bisect import bisect_left
from dataclasses import dataclass

DEFAULT_MTU = 1500


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class LinkTrace:
    opportunities: tuple
    period_ms: int
    mtu_bytes: int = DEFAULT_MTU

    def __post_init__(self):
        opps = tuple(int(t) for t in self.opportunities)
        object.__setattr__(self, "opportunities", opps)
        if not opps:
            raise TraceError("trace has no delivery opportunities")
        if self.period_ms < 1:
            raise TraceError(f"trace period must be at least 1 ms, got {self.period_ms}")
        if opps[0] < 0 or any(b < a for a, b in zip(opps, opps[1:])):
            raise TraceError("trace timestamps must be non-negative and nondecreasing")
        if opps[-1] > self.period_ms:
            raise TraceError("trace timestamp beyond its period")

    def __len__(self):
        return len(self.opportunities)

    @property
    def mean_rate_mbps(self):
        return len(self.opportunities) * self.mtu_bytes * 8 / (self.period_ms * 1000.0)

    def opportunity_time_us(self, n):
        """Absolute time of the ``n``-th opportunity (0-based, across cycles)."""
        cycle, i = divmod(n, len(self.opportunities))
        return (cycle * self.period_ms + self.opportunities[i]) * 1000

    def first_opportunity_at_or_after(self, t_us):
        """Index of the earliest opportunity whose time is >= ``t_us``."""
        t_ms = -(-t_us // 1000)
        n_per = len(self.opportunities)
        cycle = max(t_ms // self.period_ms - 1, 0)
        while True:
            i = bisect_left(self.opportunities, t_ms - cycle * self.period_ms)
            if i < n_per:
                return cycle * n_per + i
            cycle += 1

    def capacity_bytes(self, start_us, end_us):
        """Bytes deliverable by opportunities in ``[start_us, end_us)``."""
        if end_us <= start_us:
            return 0
        first = self.first_opportunity_at_or_after(start_us)
        last = self.first_opportunity_at_or_after(end_us)
        return (last - first) * self.mtu_bytes

    def to_text(self):
        if self.opportunities[-1] != self.period_ms:
            raise TraceError("trace with trailing idle time cannot be written in Mahimahi format")
        return "".join(f"{t}\n" for t in self.opportunities)


def parse_trace(text, mtu_bytes=DEFAULT_MTU):
    values = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if not line.isdigit():
            raise TraceError(f"line {lineno}: expected a non-negative integer, got {line!r}")
        value = int(line)
        if values and value < values[-1]:
            raise TraceError(f"line {lineno}: timestamp {value} decreases (previous {values[-1]})")
        values.append(value)
    if not values:
        raise TraceError("empty trace")
    if values[-1] == 0:
        raise TraceError("trace must end with a positive timestamp")
    return LinkTrace(tuple(values), values[-1], mtu_bytes)


def load_trace(path, mtu_bytes=DEFAULT_MTU):
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read(), mtu_bytes)


def write_trace(trace, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace.to_text())


def _segment(rate_mbps, duration_ms, offset_ms, mtu_bytes):
    per_ms = rate_mbps * 1e6 / (8 * mtu_bytes) / 1000.0
    exact = per_ms * duration_ms
    count = int(round(exact))
    # placement error may not exceed one MTU per second of trace
    if abs(count - exact) > duration_ms / 1000.0 + 1e-9:
        raise TraceError(
            f"{rate_mbps} Mbps over {duration_ms} ms is not representable within one MTU per second"
        )
    if count == 0:
        return []
    return [offset_ms - (-k * duration_ms // count) for k in range(1, count + 1)]


def gen_constant_trace(rate_mbps, duration_ms=1000, mtu_bytes=DEFAULT_MTU):
    """Evenly spaced opportunities at ``rate_mbps`` repeating every ``duration_ms``."""
    if rate_mbps <= 0:
        raise TraceError(f"rate must be positive, got {rate_mbps}")
    return gen_step_trace([(rate_mbps, duration_ms)], mtu_bytes)


def gen_step_trace(steps, mtu_bytes=DEFAULT_MTU):
    """Concatenate constant-rate segments ``[(rate_mbps, duration_ms), ...]``.

    A zero rate produces an outage segment. The final segment must carry at
    least one opportunity so the period survives a round trip through text.
    """
    steps = list(steps)
    if not steps:
        raise TraceError("step trace needs at least one step")
    opps = []
    offset = 0
    for rate, duration in steps:
        if duration <= 0 or int(duration) != duration:
            raise TraceError(f"step duration must be a positive integer of ms, got {duration}")
        if rate < 0:
            raise TraceError(f"step rate must be non-negative, got {rate}")
        if rate > 0:
            opps.extend(_segment(rate, int(duration), offset, mtu_bytes))
        offset += int(duration)
    if not opps or opps[-1] != offset:
        raise TraceError("the last step must deliver at least one opportunity")
    return LinkTrace(tuple(opps), offset, mtu_bytes)


def gen_random_walk_trace(seed, duration_ms=60_000, step_ms=500, low_mbps=0.6, high_mbps=24.0,
                          start_mbps=12.0, mtu_bytes=DEFAULT_MTU):
    """Seeded multiplicative random walk over capacity, held constant per step.

    Rates are snapped to whole opportunities per step so every segment is
    exactly representable.
    """
    from c2tcp_lab.sim import SeededRng

    rng = SeededRng(seed)
    per_step_unit = 8 * mtu_bytes / 1000.0 / step_ms  # Mbps of one opportunity per step
    rate = start_mbps
    steps = []
    for _ in range(max(1, duration_ms // step_ms)):
        rate = min(high_mbps, max(low_mbps, rate * math.exp(rng.uniform(-0.45, 0.45))))
        count = max(1, int(round(rate / per_step_unit)))
        steps.append((count * per_step_unit, step_ms))
    return gen_step_trace(steps, mtu_bytes)


def gen_on_off_trace(rate_mbps=12.0, on_ms=4000, off_ms=1000, cycles=6, mtu_bytes=DEFAULT_MTU):
    """Alternating full-rate and zero-capacity periods, ending on an on-period."""
    steps = []
    for _ in range(cycles):
        steps.append((rate_mbps, on_ms))
        steps.append((0, off_ms))
    steps.append((rate_mbps, on_ms))
    return gen_step_trace(steps, mtu_bytes)
