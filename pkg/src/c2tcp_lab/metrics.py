"""Evaluation metrics over per-packet records.

Delay is receiver arrival minus the first send time of the sequence number,
minus the one-way propagation delay of the data path. Percentiles use the
nearest-rank definition.
"""

from collections import Counter
from dataclasses import dataclass, field

from c2tcp_lab.link import AQM_DROP, DELIVERED, STOCHASTIC_LOSS, TAIL_DROP
from c2tcp_lab.sim import US_PER_MS

CSV_HEADER = (
    "flow_id", "algorithm", "throughput_mbps", "avg_delay_ms", "p95_delay_ms",
    "delivered", "aqm_drops", "tail_drops", "stochastic_losses",
)
TIMESERIES_HEADER = ("t_ms", "flow_id", "throughput_mbps")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class PacketRecord:
    flow_id: object
    seq: int
    size_bytes: int
    sent_at: int
    delivered_at: int = None
    fate: str = None
    tx_at: int = None

    def __post_init__(self):
        if (self.delivered_at is not None) != (self.fate == DELIVERED):
            raise MetricsError("delivered_at must be set exactly when fate is 'delivered'")
        if self.delivered_at is not None and self.delivered_at <= self.sent_at:
            raise MetricsError("delivered_at must come after sent_at")

    @classmethod
    def from_packet(cls, pkt):
        return cls(pkt.flow_id, pkt.seq, pkt.size_bytes, pkt.sent_at,
                   pkt.delivered_at, pkt.fate, pkt.tx_at)


@dataclass
class FlowMetrics:
    flow_id: object
    algorithm: str
    avg_throughput_mbps: float
    avg_delay_ms: float
    p95_delay_ms: float
    delivered_count: int
    drop_counts: dict = field(default_factory=dict)

    def csv_row(self):
        return (
            str(self.flow_id),
            self.algorithm,
            f"{self.avg_throughput_mbps:.6f}",
            f"{self.avg_delay_ms:.6f}",
            f"{self.p95_delay_ms:.6f}",
            str(self.delivered_count),
            str(self.drop_counts.get(AQM_DROP, 0)),
            str(self.drop_counts.get(TAIL_DROP, 0)),
            str(self.drop_counts.get(STOCHASTIC_LOSS, 0)),
        )

    def as_dict(self):
        return dict(zip(CSV_HEADER, (
            self.flow_id, self.algorithm, self.avg_throughput_mbps, self.avg_delay_ms,
            self.p95_delay_ms, self.delivered_count, self.drop_counts.get(AQM_DROP, 0),
            self.drop_counts.get(TAIL_DROP, 0), self.drop_counts.get(STOCHASTIC_LOSS, 0),
        )))


def per_packet_delay(rec, one_way_prop):
    """Queueing and slotting delay of a delivered record, in microseconds."""
    if rec.fate != DELIVERED or rec.delivered_at is None:
        raise MetricsError("per-packet delay is only defined for delivered packets")
    return rec.delivered_at - rec.sent_at - one_way_prop


def percentile(samples, p):
    if not samples:
        raise MetricsError("percentile of an empty sample")
    if not 0 < p <= 100:
        raise MetricsError(f"percentile must be in (0, 100], got {p}")
    ordered = sorted(samples)
    rank = -(-p * len(ordered) // 100)
    return ordered[max(int(rank), 1) - 1]


def throughput(records, duration):
    """Mbps carried by ``records`` over ``duration`` microseconds."""
    if duration <= 0:
        raise MetricsError("duration must be positive")
    bits = 8 * sum(r.size_bytes for r in records)
    return bits / duration


def jain_index(throughputs):
    xs = list(throughputs)
    if not xs:
        raise MetricsError("Jain index of an empty list")
    if any(x < 0 for x in xs):
        raise MetricsError("throughputs must be non-negative")
    top = max(xs)
    if top == 0:
        raise MetricsError("Jain index is undefined when every throughput is zero")
    # scale-free, so normalise first to keep tiny values from underflowing
    ys = [x / top for x in xs]
    return sum(ys) ** 2 / (len(ys) * sum(y * y for y in ys))


def timeseries_throughput(records, bin, start=0, end=None):
    """Per-flow delivered Mbps in consecutive bins of ``bin`` microseconds.

    Returns ``{flow_id: [(bin_start, mbps), ...]}`` covering ``[start, end)``;
    ``end`` defaults to the last delivery.
    """
    if bin <= 0:
        raise MetricsError("bin width must be positive")
    delivered = [r for r in records if r.fate == DELIVERED]
    if end is None:
        end = max((r.delivered_at for r in delivered), default=start) + 1
    nbins = max(1, -(-(end - start) // bin))
    series = {}
    for r in records:
        series.setdefault(r.flow_id, [0] * nbins)
    for r in delivered:
        t = r.delivered_at
        if start <= t < end:
            series[r.flow_id][(t - start) // bin] += r.size_bytes * 8
    return {
        fid: [(start + i * bin, bits / bin) for i, bits in enumerate(bins)]
        for fid, bins in series.items()
    }


def flow_metrics(records, one_way_prop, start, end, flow_id=None, algorithm=""):
    """Summarise one flow's records over the measurement window ``[start, end)``.

    Throughput and delay use packets that reached the receiver inside the
    window; drop counts use transmissions made inside it.
    """
    delivered = []
    drops = Counter()
    for r in records:
        if r.fate == DELIVERED:
            if start <= r.delivered_at < end:
                delivered.append(r)
        elif r.fate is not None:
            tx = r.tx_at if r.tx_at is not None else r.sent_at
            if start <= tx < end:
                drops[r.fate] += 1
    delays = [(r.delivered_at - r.sent_at - one_way_prop) / US_PER_MS for r in delivered]
    return FlowMetrics(
        flow_id=flow_id,
        algorithm=algorithm,
        avg_throughput_mbps=throughput(delivered, end - start),
        avg_delay_ms=sum(delays) / len(delays) if delays else 0.0,
        p95_delay_ms=percentile(delays, 95) if delays else 0.0,
        delivered_count=len(delivered),
        drop_counts={fate: drops.get(fate, 0) for fate in (AQM_DROP, TAIL_DROP, STOCHASTIC_LOSS)},
    )
