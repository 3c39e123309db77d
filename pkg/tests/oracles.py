"""Independent reference models used as test oracles.

Nothing here imports from the package. The C2TCP interpreter follows the
per-ack pseudocode line by line over a minimal Reno, and keeps its own
time arithmetic (decimal square roots rather than integer ones).
"""

from decimal import Decimal, getcontext

getcontext().prec = 60


class RefReno:
    def __init__(self, cwnd=10.0, ssthresh=float("inf")):
        self.cwnd = cwnd
        self.ssthresh = ssthresh

    def default_ack(self):
        if self.cwnd < self.ssthresh:
            self.cwnd = self.cwnd + 1
        else:
            self.cwnd = self.cwnd + 1 / self.cwnd

    def default_ssthresh(self):
        half = self.cwnd / 2
        return half if half > 2 else 2.0


class RefC2tcp:
    """Per-ack interpreter; times are integer microseconds."""

    def __init__(self, target, interval, cwnd=10.0, ssthresh=float("inf")):
        self.tcp = RefReno(cwnd, ssthresh)
        self.target = target
        self.interval = interval
        self.first_time = True
        self.next_time = None
        self.num_backoffs = 1

    def ack(self, rtt, now):
        # default loss-based TCP code block
        self.tcp.default_ack()
        # condition logic
        if rtt < self.target:
            self.tcp.cwnd = self.tcp.cwnd + self.target / rtt
            self.first_time = True
            self.num_backoffs = 1
        elif self.first_time:
            self.next_time = now + self.interval
            self.first_time = False
        elif now > self.next_time:
            span = Decimal(self.interval) / Decimal(self.num_backoffs).sqrt()
            self.next_time = now + int(span)  # floor: span is positive
            self.num_backoffs = self.num_backoffs + 1
            self.tcp.ssthresh = self.tcp.default_ssthresh()
            self.tcp.cwnd = 1.0
        return self.snapshot()

    def snapshot(self):
        return (self.tcp.cwnd, self.first_time, self.next_time, self.num_backoffs)


def jain(xs):
    xs = [float(x) for x in xs]
    return sum(xs) ** 2 / (len(xs) * sum(x * x for x in xs))


def nearest_rank(samples, p):
    import math

    s = sorted(samples)
    return s[max(1, math.ceil(p / 100 * len(s))) - 1]
