"""Randomised invariants (hypothesis)."""

import math

from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from c2tcp_lab.c2tcp import BAD, BRANCHES, GOOD, C2tcp, C2tcpConfig
from c2tcp_lab.cca import ALGORITHMS, AckSample, CwndState, make_controller
from c2tcp_lab.link import DELIVERED, BottleneckLink, CodelState, Packet
from c2tcp_lab.metrics import PacketRecord, flow_metrics, jain_index, percentile
from c2tcp_lab.scenario import FlowSpec, ScenarioConfig, World, run_scenario
from c2tcp_lab.sim import EventKind, SeededRng, Simulator, ms, seconds
from c2tcp_lab.traces import LinkTrace, parse_trace

from oracles import RefC2tcp

sane = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def traces(draw, max_len=40):
    gaps = draw(st.lists(st.integers(0, 5), min_size=1, max_size=max_len))
    times = []
    t = 0
    for g in gaps:
        t += g
        times.append(t)
    assume(times[-1] > 0)
    return LinkTrace(tuple(times), times[-1])


@sane
@given(traces())
def test_trace_text_round_trip(tr):
    assert parse_trace(tr.to_text()) == tr
    assert parse_trace(tr.to_text().replace("\n", "\r\n")) == tr


@sane
@given(traces(), st.integers(0, 10_000_000))
def test_first_opportunity_is_earliest_at_or_after(tr, t):
    n = tr.first_opportunity_at_or_after(t)
    assert tr.opportunity_time_us(n) >= t
    if n > 0:
        assert tr.opportunity_time_us(n - 1) < t


@sane
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 3)), min_size=1, max_size=200))
def test_dispatch_order_is_time_then_fifo(items):
    sim = Simulator()
    seen = []

    class Sink:
        def handle(self, event):
            seen.append((event.fire_at, event.payload))

    ent = sim.add_entity(Sink())
    for i, (t, _) in enumerate(items):
        sim.schedule(t, EventKind.TIMER_EXPIRY, ent, i)
    sim.run_until(100)
    assert seen == sorted(seen)
    assert len(seen) == len(items)


rtts = st.integers(ms(1), ms(400))
streams = st.lists(st.tuples(rtts, st.integers(0, ms(60))), min_size=1, max_size=120)


@sane
@given(streams, st.sampled_from([50, 100, 200]), st.sampled_from([50, 100, 200]))
def test_exactly_one_branch_and_reset_law(stream, target, interval):
    c = C2tcp(make_controller("newreno"), C2tcpConfig(ms(target), ms(interval)))
    w = CwndState()
    now = 0
    for rtt, gap in stream:
        now += gap
        branch = c.on_ack(AckSample(0, rtt, now), w)
        assert branch in BRANCHES
        assert c.state.num_backoffs >= 1
        assert w.cwnd >= 1
        if rtt < ms(target):
            assert branch == GOOD and c.state.num_backoffs == 1 and c.state.first_time
    assert sum(c.branch_counts.values()) == len(stream)


@sane
@given(streams, st.sampled_from([50, 100, 200]), st.sampled_from([50, 100, 200]))
def test_overlay_matches_reference_interpreter(stream, target, interval):
    ref = RefC2tcp(ms(target), ms(interval))
    c = C2tcp(make_controller("newreno"), C2tcpConfig(ms(target), ms(interval)))
    w = CwndState()
    now = 0
    for rtt, gap in stream:
        now += gap
        expected = ref.ack(rtt, now)
        c.on_ack(AckSample(0, rtt, now), w)
        assert (w.cwnd, c.state.first_time, c.state.next_time, c.state.num_backoffs) == expected


@sane
@given(st.lists(st.integers(ms(1), ms(20)), min_size=1, max_size=300), st.sampled_from([75, 100, 200]))
def test_backoff_spacing_lower_bound(gaps, interval):
    c = C2tcp(make_controller("cubic"), C2tcpConfig(ms(100), ms(interval)))
    w = CwndState()
    now = 0
    for g in gaps:
        now += g
        c.on_ack(AckSample(0, ms(250), now), w)
    b = c.backoff_times
    for k in range(1, len(b)):
        assert b[k] - b[k - 1] >= math.floor(ms(interval) / math.sqrt(k))


events = st.lists(st.sampled_from(["ack", "slow", "dup", "rto", "sent"]), max_size=150)


@sane
@given(st.sampled_from(ALGORITHMS), events, st.floats(1, 200))
def test_cwnd_never_below_one(algorithm, evs, start):
    c = make_controller(algorithm)
    w = CwndState(cwnd=start)
    now = 0
    for e in evs:
        now += ms(7)
        if e in ("ack", "slow"):
            rtt = ms(30) if e == "ack" else ms(500)
            w.observe_rtt(rtt)
            c.on_ack(AckSample(0, rtt, now), w)
        elif e == "dup":
            c.on_dupack_loss(w)
        elif e == "rto":
            c.on_rto(w)
        else:
            c.on_sent(w)
        assert w.cwnd >= 1 and math.isfinite(w.cwnd)


@sane
@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=200), st.floats(0.1, 100), st.floats(0.1, 100))
def test_percentile_monotone(samples, p, q):
    lo, hi = sorted((p, q))
    assert percentile(samples, lo) <= percentile(samples, hi)
    assert percentile(samples, 100) == max(samples)


@sane
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=30))
def test_jain_bounds(xs):
    assume(sum(xs) > 0)
    j = jain_index(xs)
    assert 1 / len(xs) - 1e-9 <= j <= 1 + 1e-9


@sane
@given(traces(), st.lists(st.tuples(st.integers(0, 30), st.integers(1, 3)), min_size=1, max_size=60),
       st.one_of(st.none(), st.integers(1, 8)), st.booleans(), st.floats(0, 0.5))
def test_link_conservation_and_capacity(tr, arrivals, cap, codel, loss):
    sim = Simulator()
    out = []
    link = BottleneckLink(sim, tr, cap, CodelState() if codel else None, ms(20), loss, SeededRng(1),
                          lambda p, now: out.append((p, now)))
    t = 0
    seq = 0
    for gap, burst in arrivals:
        t += ms(gap)
        sim.run_until(t)
        for _ in range(burst):
            link.enqueue(Packet(seq % 2, seq, 1500, t), t)
            seq += 1
        for c in link.counters.values():
            assert c.balanced()
    end = t + ms(200)
    sim.run_until(end)
    for c in link.counters.values():
        assert c.balanced()
    # never more than the trace offers, FIFO kept, sojourn exact
    assert len(out) * 1500 <= tr.capacity_bytes(0, end + 1)
    assert [p.seq for p, _ in out] == sorted(p.seq for p, _ in out)
    for p, now in out:
        assert p.delivered_at - ms(20) - p.enqueued_at == now - p.enqueued_at
        assert now in {tr.opportunity_time_us(n) for n in range(tr.first_opportunity_at_or_after(now), tr.first_opportunity_at_or_after(now) + 1)}


@sane
@given(traces(), st.integers(1, 40))
def test_link_is_work_conserving(tr, n):
    # a standing queue uses every opportunity (no AQM, no loss)
    sim = Simulator()
    out = []
    link = BottleneckLink(sim, tr, on_forward=lambda p, now: out.append(now))
    for i in range(n):
        link.enqueue(Packet(1, i, 1500, 0), 0)
    sim.run_until(seconds(10))
    assert out == [tr.opportunity_time_us(tr.first_opportunity_at_or_after(0) + i) for i in range(n)]


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(ALGORITHMS), st.sampled_from(ALGORITHMS), st.floats(0, 0.05),
       st.sampled_from([5, 20, "unlimited"]), st.integers(0, 2**32))
def test_metrics_agree_with_link_counters(a, b, loss, cap, seed):
    cfg = ScenarioConfig(trace="constant:6", duration_s=1.5, loss_prob=loss, queue_cap=cap, seed=seed,
                         flows=[FlowSpec(a), FlowSpec(b, 0.2)]).validate()
    world = World(cfg)
    world.run()
    for s in world.senders:
        c = world.links[1].counters[s.flow_id]
        fates = [p.fate for p in s.records]
        assert fates.count(DELIVERED) == c.delivered
        assert fates.count("aqm-drop") == c.aqm_drops
        assert fates.count("tail-drop") == c.tail_drops
        assert fates.count("stochastic-loss") == c.stochastic_losses
        assert fates.count(None) == c.queued
        recs = [PacketRecord.from_packet(p) for p in s.records]
        fm = flow_metrics(recs, world.prop, 0, seconds(10), s.flow_id)
        assert fm.delivered_count == c.delivered
        assert sum(fm.drop_counts.values()) == c.aqm_drops + c.tail_drops + c.stochastic_losses
    total = sum(
        flow_metrics([PacketRecord.from_packet(p) for p in s.records], world.prop, 0, seconds(1.5)).avg_throughput_mbps
        for s in world.senders)
    assert total * 1.5e6 / 8 <= world.trace.capacity_bytes(0, seconds(1.5)) + 1500


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 0.05))
def test_replay_determinism(seed, loss):
    cfg = ScenarioConfig(trace="corpus:random-walk", duration_s=2, loss_prob=loss, seed=seed,
                         flows=[FlowSpec("c2tcp+cubic"), FlowSpec("vegas", 0.5, 2)]).validate()
    assert run_scenario(cfg).digest == run_scenario(cfg).digest
