"""C2TCP: a delay-condition overlay on a loss-based congestion controller.

On every ack the wrapped controller runs first, then the overlay classifies
the network condition from the raw RTT of that ack:

* ``rtt < target``: good condition. The window gets an extra
  ``target / rtt`` segments and the monitoring state resets.
* first RTT at or above target: a monitoring window of ``interval`` is armed
  and the window is left alone.
* still no sub-target RTT once the window has expired: bad condition. The
  window is reset to one segment and the next window shrinks to
  ``interval / sqrt(n)`` where ``n`` counts consecutive back-offs.
"""

import math
from dataclasses import dataclass, replace

from c2tcp_lab.sim import ms

GOOD = "good"
WAITING = "waiting"
BAD = "bad"
MONITORING = "monitoring"
BRANCHES = (GOOD, WAITING, BAD, MONITORING)


@dataclass
class C2tcpConfig:
    target: int = ms(100)
    interval: int = ms(100)
    base_algorithm: str = "cubic"

    def __post_init__(self):
        self.target = _positive_us("target", self.target)
        self.interval = _positive_us("interval", self.interval)

    def set_target(self, target):
        self.target = _positive_us("target", target)

    def set_interval(self, interval):
        self.interval = _positive_us("interval", interval)

    def copy(self):
        return replace(self)


def _positive_us(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return int(round(value))


def set_target(cfg, target):
    cfg.set_target(target)


def set_interval(cfg, interval):
    cfg.set_interval(interval)


@dataclass
class ConditionState:
    first_time: bool = True
    next_time: int = None
    num_backoffs: int = 1


def shrunk_interval(interval, num_backoffs):
    """floor(interval / sqrt(num_backoffs)) in exact integer arithmetic."""
    return math.isqrt(interval * interval // num_backoffs)


def c2tcp_on_ack(s, w, cfg, st, recalc_ssthresh):
    """Apply the overlay for one ack; returns the branch taken.

    ``recalc_ssthresh(w)`` is the wrapped controller's loss-time ssthresh rule.
    """
    rtt = s.rtt
    now = s.now
    if rtt < cfg.target:
        w.cwnd += cfg.target / rtt
        st.first_time = True
        st.num_backoffs = 1
        return GOOD
    if st.first_time:
        st.next_time = now + cfg.interval
        st.first_time = False
        return WAITING
    if now > st.next_time:
        st.next_time = now + shrunk_interval(cfg.interval, st.num_backoffs)
        st.num_backoffs += 1
        w.ssthresh = recalc_ssthresh(w)
        w.cwnd = 1.0
        return BAD
    return MONITORING


class C2tcp:
    """Wraps a loss-based controller and applies :func:`c2tcp_on_ack` after it."""

    def __init__(self, base, cfg=None):
        self.base = base
        self.cfg = cfg.copy() if cfg is not None else C2tcpConfig(base_algorithm=base.name)
        self.state = ConditionState()
        self.branch_counts = dict.fromkeys(BRANCHES, 0)
        self.backoff_times = []

    @property
    def name(self):
        return f"c2tcp+{self.base.name}"

    def set_target(self, target):
        self.cfg.set_target(target)

    def set_interval(self, interval):
        self.cfg.set_interval(interval)

    def on_ack(self, s, w):
        self.base.on_ack(s, w)
        branch = c2tcp_on_ack(s, w, self.cfg, self.state, self.base.recalc_ssthresh)
        self.branch_counts[branch] += 1
        if branch == BAD:
            self.backoff_times.append(s.now)
        return branch

    def on_sent(self, w):
        self.base.on_sent(w)

    def recalc_ssthresh(self, w):
        return self.base.recalc_ssthresh(w)

    def on_dupack_loss(self, w):
        self.base.on_dupack_loss(w)

    def on_rto(self, w):
        self.base.on_rto(w)
