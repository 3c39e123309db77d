"""Congestion controllers: the hook contract plus NewReno, Cubic and Vegas.

Windows are real-valued and counted in segments. Every hook keeps
``cwnd >= 1``.
"""

import math
from dataclasses import dataclass

from c2tcp_lab.sim import US_PER_S

MIN_CWND = 1.0
MIN_SSTHRESH = 2.0
INITIAL_CWND = 10.0

CUBIC_C = 0.4
CUBIC_BETA = 0.7

VEGAS_ALPHA = 2
VEGAS_BETA = 4
VEGAS_GAMMA = 1


@dataclass
class AckSample:
    acked_seq: int
    rtt: int
    now: int
    newly_acked_count: int = 1
    in_recovery: bool = False

    def __post_init__(self):
        if self.rtt <= 0:
            raise ValueError(f"rtt must be positive, got {self.rtt}")


@dataclass
class CwndState:
    cwnd: float = INITIAL_CWND
    ssthresh: float = math.inf
    in_flight: int = 0
    srtt: int = None
    rttvar: int = None
    min_rtt: int = None

    def observe_rtt(self, rtt):
        """Fold one RTT sample into srtt/rttvar (gains 1/8, 1/4) and min_rtt."""
        if self.srtt is None:
            self.srtt = rtt
            self.rttvar = rtt // 2
        else:
            self.rttvar = (3 * self.rttvar + abs(self.srtt - rtt)) // 4
            self.srtt = (7 * self.srtt + rtt) // 8
        if self.min_rtt is None or rtt < self.min_rtt:
            self.min_rtt = rtt


class CongestionController:
    """Base contract. Subclasses override the hooks they care about."""

    name = "base"

    def on_ack(self, s, w):
        pass

    def on_sent(self, w):
        pass

    def recalc_ssthresh(self, w):
        """ssthresh the algorithm would pick on a congestion event."""
        return max(w.cwnd / 2.0, MIN_SSTHRESH)

    def on_dupack_loss(self, w):
        w.ssthresh = self.recalc_ssthresh(w)
        w.cwnd = max(w.cwnd / 2.0, MIN_CWND)

    def on_rto(self, w):
        w.ssthresh = self.recalc_ssthresh(w)
        w.cwnd = MIN_CWND


class NewReno(CongestionController):
    name = "newreno"

    def on_ack(self, s, w):
        if s.in_recovery:
            return
        if w.cwnd < w.ssthresh:
            w.cwnd += s.newly_acked_count
        else:
            w.cwnd += s.newly_acked_count / w.cwnd


def newreno_on_ack(s, w):
    NewReno().on_ack(s, w)


def _cbrt(x):
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def cubic_k(w_max, beta=CUBIC_BETA, c=CUBIC_C):
    return _cbrt(w_max * (1.0 - beta) / c) if w_max > 0 else 0.0


def cubic_window(t, w_max, beta=CUBIC_BETA, c=CUBIC_C):
    """W_cubic(t) = C (t - K)^3 + W_max, with ``t`` in seconds since the last loss."""
    if t < 0:
        raise ValueError("t must be non-negative")
    k = cubic_k(w_max, beta, c)
    return c * (t - k) ** 3 + w_max


class Cubic(CongestionController):
    """RFC 8312 Cubic with fast convergence and the TCP-friendly region.

    Hybrid slow start is not modelled; slow start is plain doubling.
    """

    name = "cubic"

    def __init__(self, beta=CUBIC_BETA, c=CUBIC_C, fast_convergence=True):
        self.beta = beta
        self.c = c
        self.fast_convergence = fast_convergence
        self.w_max = 0.0
        self.w_last_max = 0.0
        self.epoch_start = None
        self.k = 0.0
        self.origin = 0.0
        self.w_est = 0.0

    def on_ack(self, s, w):
        if s.in_recovery:
            return
        if w.cwnd < w.ssthresh:
            w.cwnd += s.newly_acked_count
            return
        if self.epoch_start is None:
            self.epoch_start = s.now
            if w.cwnd < self.w_max:
                self.k = _cbrt((self.w_max - w.cwnd) / self.c)
                self.origin = self.w_max
            else:
                self.k = 0.0
                self.origin = w.cwnd
            self.w_est = w.cwnd
        rtt = w.min_rtt if w.min_rtt is not None else s.rtt
        t = (s.now - self.epoch_start + rtt) / US_PER_S
        target = self.c * (t - self.k) ** 3 + self.origin
        self.w_est += 3.0 * (1.0 - self.beta) / (1.0 + self.beta) * s.newly_acked_count / w.cwnd
        if self.w_est > target:
            target = self.w_est
        target = min(target, 1.5 * w.cwnd)
        if target > w.cwnd:
            w.cwnd += (target - w.cwnd) / w.cwnd * s.newly_acked_count
        else:
            w.cwnd += 0.01 / w.cwnd * s.newly_acked_count

    def recalc_ssthresh(self, w):
        cwnd = w.cwnd
        if self.fast_convergence and cwnd < self.w_last_max:
            self.w_max = cwnd * (1.0 + self.beta) / 2.0
        else:
            self.w_max = cwnd
        self.w_last_max = cwnd
        self.epoch_start = None
        return max(cwnd * self.beta, MIN_SSTHRESH)

    def on_dupack_loss(self, w):
        w.ssthresh = self.recalc_ssthresh(w)
        w.cwnd = max(w.cwnd * self.beta, MIN_CWND)


class Vegas(CongestionController):
    """Vegas: once per RTT, steer the estimated queue backlog into [alpha, beta].

    Slow start doubles per RTT until the backlog estimate exceeds gamma.
    """

    name = "vegas"

    def __init__(self, alpha=VEGAS_ALPHA, beta=VEGAS_BETA, gamma=VEGAS_GAMMA):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.next_eval = None

    def on_ack(self, s, w):
        if s.in_recovery or w.min_rtt is None:
            return
        if self.next_eval is not None and s.now < self.next_eval:
            if w.cwnd < w.ssthresh:
                w.cwnd += s.newly_acked_count
            return
        self.next_eval = s.now + s.rtt
        diff = w.cwnd * (s.rtt - w.min_rtt) / s.rtt
        if w.cwnd < w.ssthresh:
            if diff > self.gamma:
                w.cwnd = max(min(w.cwnd, w.cwnd * w.min_rtt / s.rtt + 1), MIN_CWND)
                w.ssthresh = max(min(w.ssthresh, w.cwnd - 1), MIN_SSTHRESH)
            else:
                w.cwnd += s.newly_acked_count
            return
        if diff < self.alpha:
            w.cwnd += 1
        elif diff > self.beta:
            w.cwnd = max(w.cwnd - 1, MIN_CWND)


def vegas_on_ack(s, w, controller=None):
    (controller or Vegas()).on_ack(s, w)


def loss_backoff(controller, w, timeout=False):
    """Shared loss response: dupack loss or retransmission timeout."""
    if timeout:
        controller.on_rto(w)
    else:
        controller.on_dupack_loss(w)


BASE_ALGORITHMS = {"newreno": NewReno, "cubic": Cubic, "vegas": Vegas}
ALGORITHMS = ("newreno", "cubic", "vegas", "c2tcp+newreno", "c2tcp+cubic")


def make_controller(algorithm, c2tcp_config=None):
    """Build a controller from its configuration name."""
    if algorithm in BASE_ALGORITHMS:
        return BASE_ALGORITHMS[algorithm]()
    if algorithm.startswith("c2tcp"):
        from c2tcp_lab.c2tcp import C2tcp, C2tcpConfig

        cfg = c2tcp_config.copy() if c2tcp_config is not None else C2tcpConfig()
        base = algorithm.partition("+")[2] or cfg.base_algorithm
        if base not in ("newreno", "cubic"):
            raise ValueError(f"C2TCP needs a loss-based base controller, got {base!r}")
        cfg.base_algorithm = base
        return C2tcp(BASE_ALGORITHMS[base](), cfg)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
