"""Trace-driven bottleneck link with DropTail or CoDel queue management."""

import math
from collections import deque
from dataclasses import dataclass

from c2tcp_lab.sim import EventKind, bernoulli, ms

DELIVERED = "delivered"
AQM_DROP = "aqm-drop"
TAIL_DROP = "tail-drop"
STOCHASTIC_LOSS = "stochastic-loss"
FATES = (DELIVERED, AQM_DROP, TAIL_DROP, STOCHASTIC_LOSS)


class Packet:
    """One transmission of a data segment.

    ``sent_at`` is the first transmission time of ``seq`` (delay is measured
    from it); ``tx_at`` is when this particular copy left the sender. The
    ``acked``/``lost``/``dupacks`` slots are sender bookkeeping.
    """

    __slots__ = (
        "flow_id", "seq", "size_bytes", "sent_at", "tx_at", "enqueued_at",
        "delivered_at", "fate", "tx_index", "acked", "lost", "dupacks",
    )

    def __init__(self, flow_id, seq, size_bytes, sent_at, tx_at=None, tx_index=0):
        self.flow_id = flow_id
        self.seq = seq
        self.size_bytes = size_bytes
        self.sent_at = sent_at
        self.tx_at = sent_at if tx_at is None else tx_at
        self.enqueued_at = None
        self.delivered_at = None
        self.fate = None
        self.tx_index = tx_index
        self.acked = False
        self.lost = False
        self.dupacks = 0

    def __repr__(self):
        return f"Packet(flow={self.flow_id}, seq={self.seq}, tx={self.tx_index}, fate={self.fate})"


@dataclass
class CodelState:
    """CoDel controller state (control law of RFC 8289)."""

    target_us: int = ms(5)
    interval_us: int = ms(100)
    mtu_bytes: int = 1500
    first_above_time: int = None
    drop_next: int = 0
    count: int = 0
    lastcount: int = 0
    dropping: bool = False
    _law_pending: bool = False

    def control_law(self, t):
        return t + int(self.interval_us / math.sqrt(self.count))

    def _ok_to_drop(self, sojourn, now, backlog_bytes):
        if sojourn < self.target_us or backlog_bytes <= self.mtu_bytes:
            self.first_above_time = None
            return False
        if self.first_above_time is None:
            self.first_above_time = now + self.interval_us
            return False
        return now >= self.first_above_time

    def decide(self, sojourn, now, backlog_bytes=None):
        """Return True to drop the head packet.

        ``backlog_bytes`` is what stays queued behind the head; when omitted
        the queue is assumed to hold more than one MTU.
        """
        if backlog_bytes is None:
            backlog_bytes = self.mtu_bytes + 1
        ok = self._ok_to_drop(sojourn, now, backlog_bytes)
        if self.dropping:
            if not ok:
                self.dropping = False
                self._law_pending = False
                return False
            if self._law_pending:
                self.drop_next = self.control_law(self.drop_next)
                self._law_pending = False
            if now >= self.drop_next:
                self.count += 1
                self._law_pending = True
                return True
            return False
        if ok:
            self.dropping = True
            delta = self.count - self.lastcount
            self.count = 1
            if delta > 1 and now - self.drop_next < 16 * self.interval_us:
                self.count = delta
            self.drop_next = self.control_law(now)
            self.lastcount = self.count
            return True
        return False

    def on_queue_empty(self):
        self.first_above_time = None
        self.dropping = False
        self._law_pending = False


def codel_decide(state, sojourn, now, backlog_bytes=None):
    return "drop" if state.decide(sojourn, now, backlog_bytes) else "keep"


class FlowCounters:
    __slots__ = ("enqueued", "delivered", "aqm_drops", "tail_drops", "stochastic_losses", "queued")

    def __init__(self):
        self.enqueued = 0
        self.delivered = 0
        self.aqm_drops = 0
        self.tail_drops = 0
        self.stochastic_losses = 0
        self.queued = 0

    def balanced(self):
        return self.enqueued == (
            self.delivered + self.aqm_drops + self.tail_drops + self.stochastic_losses + self.queued
        )

    def as_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}


class BottleneckLink:
    """FIFO queue served by the delivery opportunities of a :class:`LinkTrace`.

    Opportunity events are only scheduled while the queue is non-empty;
    opportunities that pass while idle are wasted, as on a real link.
    Forwarded packets are handed to ``on_forward(pkt, now)`` with
    ``pkt.delivered_at`` already set to the receiver arrival time.
    """

    def __init__(self, sim, trace, queue_cap=None, aqm=None, one_way_prop_delay=ms(20),
                 loss_prob=0.0, rng=None, on_forward=None, name="link"):
        if loss_prob and rng is None:
            raise ValueError("a random source is required when loss_prob > 0")
        self.sim = sim
        self.trace = trace
        self.queue_cap = queue_cap
        self.aqm = aqm
        self.one_way_prop_delay = one_way_prop_delay
        self.loss_prob = loss_prob
        self.rng = rng
        self.on_forward = on_forward
        self.name = name
        self.queue = deque()
        self.queued_bytes = 0
        self.counters = {}
        self.opportunities_used = 0
        self._next_opp = 0
        self._scheduled = False
        self.entity = sim.add_entity(self)

    def flow_counters(self, flow_id):
        c = self.counters.get(flow_id)
        if c is None:
            c = self.counters[flow_id] = FlowCounters()
        return c

    def enqueue(self, pkt, now):
        c = self.flow_counters(pkt.flow_id)
        c.enqueued += 1
        if self.queue_cap is not None and len(self.queue) >= self.queue_cap:
            pkt.fate = TAIL_DROP
            c.tail_drops += 1
            return False
        pkt.enqueued_at = now
        self.queue.append(pkt)
        self.queued_bytes += pkt.size_bytes
        c.queued += 1
        if not self._scheduled:
            self._schedule_opportunity(now)
        return True

    def _schedule_opportunity(self, now):
        trace = self.trace
        n = trace.first_opportunity_at_or_after(now)
        if n < self._next_opp:
            n = self._next_opp
        self._scheduled = True
        self.sim.schedule(trace.opportunity_time_us(n), EventKind.DELIVERY_OPPORTUNITY, self.entity, n)

    def handle(self, event):
        self._next_opp = event.payload + 1
        self._scheduled = False
        self.on_delivery_opportunity(event.fire_at)
        if self.queue:
            self._schedule_opportunity(event.fire_at)

    def on_delivery_opportunity(self, now):
        queue = self.queue
        aqm = self.aqm
        self.opportunities_used += 1
        while queue:
            pkt = queue.popleft()
            self.queued_bytes -= pkt.size_bytes
            c = self.counters[pkt.flow_id]
            c.queued -= 1
            if aqm is not None and aqm.decide(now - pkt.enqueued_at, now, self.queued_bytes):
                pkt.fate = AQM_DROP
                c.aqm_drops += 1
                continue
            if self.loss_prob and bernoulli(self.loss_prob, self.rng):
                pkt.fate = STOCHASTIC_LOSS
                c.stochastic_losses += 1
                return None
            pkt.fate = DELIVERED
            pkt.delivered_at = now + self.one_way_prop_delay
            c.delivered += 1
            if self.on_forward is not None:
                self.on_forward(pkt, now)
            return pkt
        if aqm is not None:
            aqm.on_queue_empty()
        self.opportunities_used -= 1
        return None
