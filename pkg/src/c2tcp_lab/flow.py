"""Always-backlogged (iperf-like) sender and its ack path.

The receiver acks every packet individually and the sender learns exactly
which transmission each ack covers, so loss detection reduces to counting
later transmissions acked past a hole: three of them declare it lost. The
bottleneck and ack path are FIFO, so a hole can only mean a drop.
"""

import math
from collections import deque

from c2tcp_lab.cca import AckSample, CwndState, INITIAL_CWND
from c2tcp_lab.link import Packet
from c2tcp_lab.sim import EventKind, ms, seconds

DUPACK_THRESHOLD = 3
RTO_MIN = ms(200)
RTO_INITIAL = seconds(1)
RTO_MAX_BACKOFF = 64


class InvariantViolation(AssertionError):
    pass


class AckPacket(Packet):
    """Ack carried over a trace-driven uplink; ``data`` is the acked packet."""

    __slots__ = ("data",)

    def __init__(self, data, now):
        super().__init__(data.flow_id, data.seq, 40, now)
        self.data = data


class BulkSender:
    def __init__(self, sim, flow_id, controller, link, mtu_bytes=1500, start_at=0,
                 initial_cwnd=INITIAL_CWND, algorithm=None):
        self.sim = sim
        self.flow_id = flow_id
        self.controller = controller
        self.algorithm = algorithm or controller.name
        self.link = link
        self.mtu_bytes = mtu_bytes
        self.start_at = start_at
        self.w = CwndState(cwnd=float(initial_cwnd))
        self.records = []
        self.outstanding = deque()
        self.retx = deque()
        self.pending_retx = {}
        self.next_seq = 0
        self.tx_count = 0
        self.recovery_point = -1
        self.highest_acked_tx = -1
        self.rto = RTO_INITIAL
        self.rto_backoff = 1
        self.timer_deadline = None
        self.timer_pending = False
        self.started = False
        self.acks = 0
        self.loss_events = 0
        self.timeouts = 0
        self.entity = sim.add_entity(self)
        sim.schedule(start_at, EventKind.FLOW_START, self.entity)

    def handle(self, event):
        kind = event.kind
        if kind == EventKind.PACKET_ARRIVAL:
            self.on_ack(event.payload, event.fire_at)
        elif kind == EventKind.TIMER_EXPIRY:
            self.on_timer(event.fire_at)
        elif kind == EventKind.FLOW_START:
            self.started = True
            self.try_send(event.fire_at)
            self._arm_timer(event.fire_at)

    def try_send(self, now):
        if not self.started:
            return
        w = self.w
        limit = math.ceil(w.cwnd)
        if w.in_flight >= limit:
            return
        retx = self.retx
        pending = self.pending_retx
        records = self.records
        outstanding = self.outstanding
        controller = self.controller
        enqueue = self.link.enqueue
        while w.in_flight < limit:
            if retx:
                seq = retx.popleft()
                if seq not in pending:
                    continue
                sent_at = pending.pop(seq)
            else:
                seq = self.next_seq
                self.next_seq += 1
                sent_at = now
            pkt = Packet(self.flow_id, seq, self.mtu_bytes, sent_at, now, self.tx_count)
            self.tx_count += 1
            records.append(pkt)
            outstanding.append(pkt)
            w.in_flight += 1
            controller.on_sent(w)
            enqueue(pkt, now)

    def on_ack(self, pkt, now):
        w = self.w
        self.acks += 1
        pkt.acked = True
        if not pkt.lost:
            w.in_flight -= 1
        self.pending_retx.pop(pkt.seq, None)
        # clock resolution: a zero-delay path can ack within the send tick
        rtt = max(now - pkt.tx_at, 1)
        w.observe_rtt(rtt)
        self.rto = max(w.srtt + 4 * w.rttvar, RTO_MIN)
        self.rto_backoff = 1
        if pkt.tx_index > self.highest_acked_tx:
            self.highest_acked_tx = pkt.tx_index

        first_lost = self._detect_losses(pkt.tx_index)
        if first_lost is not None and first_lost > self.recovery_point:
            self.controller.on_dupack_loss(w)
            self.loss_events += 1
            self.recovery_point = self.tx_count - 1

        sample = AckSample(pkt.seq, rtt, now, 1, self.highest_acked_tx <= self.recovery_point)
        self.controller.on_ack(sample, w)
        if w.cwnd < 1.0:
            raise InvariantViolation(f"flow {self.flow_id}: cwnd {w.cwnd} < 1 after ack")

        self.try_send(now)
        if w.in_flight > 0:
            self._arm_timer(now)
        else:
            self.timer_deadline = None

    def _detect_losses(self, acked_tx):
        out = self.outstanding
        while out and (out[0].acked or out[0].lost):
            out.popleft()
        first_lost = None
        for p in out:
            if p.tx_index >= acked_tx:
                break
            if p.acked or p.lost:
                continue
            p.dupacks += 1
            if p.dupacks >= DUPACK_THRESHOLD:
                self._mark_lost(p)
                if first_lost is None:
                    first_lost = p.tx_index
        while out and (out[0].acked or out[0].lost):
            out.popleft()
        return first_lost

    def _mark_lost(self, p):
        p.lost = True
        self.w.in_flight -= 1
        self.retx.append(p.seq)
        self.pending_retx[p.seq] = p.sent_at

    def _arm_timer(self, now):
        self.timer_deadline = now + self.rto * self.rto_backoff
        if not self.timer_pending:
            self.timer_pending = True
            self.sim.schedule(self.timer_deadline, EventKind.TIMER_EXPIRY, self.entity)

    def on_timer(self, now):
        self.timer_pending = False
        if self.timer_deadline is None:
            return
        if now < self.timer_deadline:
            self.timer_pending = True
            self.sim.schedule(self.timer_deadline, EventKind.TIMER_EXPIRY, self.entity)
            return
        self.timer_deadline = None
        if self.w.in_flight > 0:
            self._on_timeout(now)

    def _on_timeout(self, now):
        self.timeouts += 1
        for p in self.outstanding:
            if not p.acked and not p.lost:
                self._mark_lost(p)
        self.outstanding.clear()
        self.controller.on_rto(self.w)
        self.recovery_point = self.tx_count - 1
        self.rto_backoff = min(self.rto_backoff * 2, RTO_MAX_BACKOFF)
        self.try_send(now)
        if self.w.in_flight > 0:
            self._arm_timer(now)


class AckPath:
    """Carries acks from the receiver back to senders.

    With no uplink link the path is a fixed, loss-free delay. With one, each
    ack is queued on that trace-driven link when its data packet reaches the
    receiver.
    """

    def __init__(self, sim, delay, uplink=None):
        self.sim = sim
        self.delay = delay
        self.uplink = uplink
        self.senders = {}
        self.entity = sim.add_entity(self)
        if uplink is not None:
            uplink.on_forward = self._uplink_forward

    def register(self, sender):
        self.senders[sender.flow_id] = sender

    def on_data_forwarded(self, pkt, now):
        """Bottleneck callback: ``pkt`` reaches the receiver at ``pkt.delivered_at``."""
        if self.uplink is None:
            sender = self.senders[pkt.flow_id]
            self.sim.schedule(pkt.delivered_at + self.delay, EventKind.PACKET_ARRIVAL, sender.entity, pkt)
        else:
            self.sim.schedule(pkt.delivered_at, EventKind.PACKET_ARRIVAL, self.entity, pkt)

    def handle(self, event):
        self.uplink.enqueue(AckPacket(event.payload, event.fire_at), event.fire_at)

    def _uplink_forward(self, ack, now):
        sender = self.senders[ack.flow_id]
        self.sim.schedule(ack.delivered_at, EventKind.PACKET_ARRIVAL, sender.entity, ack.data)
