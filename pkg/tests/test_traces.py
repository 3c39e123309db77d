import pytest

from c2tcp_lab.traces import (
    LinkTrace, TraceError, gen_constant_trace, gen_on_off_trace, gen_random_walk_trace,
    gen_step_trace, load_trace, parse_trace, write_trace,
)


def test_parse_simple_trace():
    tr = parse_trace("1\n2\n3\n")
    assert tr.opportunities == (1, 2, 3)
    assert tr.period_ms == 3
    assert tr.mean_rate_mbps == pytest.approx(12.0)


def test_parse_repeated_timestamps():
    tr = parse_trace("5\n5\n5\n")
    assert tr.opportunities == (5, 5, 5)
    assert tr.period_ms == 5


def test_parse_crlf_and_blank_lines():
    assert parse_trace("1\r\n2\r\n\r\n4\r\n").opportunities == (1, 2, 4)


@pytest.mark.parametrize("text", ["3\n1\n", "", "\n\n", "1\nx\n", "1.5\n", "-1\n2\n", "0\n"])
def test_parse_errors(text):
    with pytest.raises(TraceError):
        parse_trace(text)


def test_opportunity_times_loop_with_period():
    tr = parse_trace("1\n2\n3\n")
    assert [tr.opportunity_time_us(n) for n in range(5)] == [1000, 2000, 3000, 4000, 5000]
    assert tr.first_opportunity_at_or_after(3001) == 3
    assert tr.opportunity_time_us(tr.first_opportunity_at_or_after(3001)) == 4000


@pytest.mark.parametrize("rate,per_second", [(24, 2000), (12, 1000), (0.012, 1), (2.4, 200)])
def test_constant_trace_density(rate, per_second):
    tr = gen_constant_trace(rate, 1000)
    assert len(tr) == per_second
    assert tr.period_ms == 1000
    assert tr.mean_rate_mbps == pytest.approx(rate)


def test_constant_24_is_two_per_ms():
    tr = gen_constant_trace(24, 1000)
    assert tr.opportunities[:4] == (1, 1, 2, 2)


def test_constant_trace_rejects_nonpositive_rate():
    with pytest.raises(TraceError):
        gen_constant_trace(0)
    with pytest.raises(TraceError):
        gen_constant_trace(-3)


def test_step_trace_segments():
    tr = gen_step_trace([(24, 1000), (2.4, 1000)])
    assert tr.period_ms == 2000
    assert sum(1 for t in tr.opportunities if t <= 1000) == 2000
    assert sum(1 for t in tr.opportunities if t > 1000) == 200


def test_step_trace_single_low_rate():
    assert len(gen_step_trace([(0.012, 1000)])) == 1


def test_step_trace_errors():
    with pytest.raises(TraceError):
        gen_step_trace([])
    with pytest.raises(TraceError):
        gen_step_trace([(12, 0)])


def test_capacity_never_exceeds_opportunities():
    tr = gen_constant_trace(24, 1000)
    # [0, 1 s) holds the slots at 1..999 ms; the pair at 1000 ms is excluded
    assert tr.capacity_bytes(0, 1_000_000) == 1998 * 1500
    assert tr.capacity_bytes(500, 1_000_500) == 2000 * 1500
    assert tr.capacity_bytes(2_000_500, 3_000_500) == 2000 * 1500


def test_round_trip_through_file(tmp_path):
    tr = gen_step_trace([(12, 500), (3, 500)])
    path = tmp_path / "t.trace"
    write_trace(tr, path)
    assert load_trace(path) == tr
    assert path.read_text().endswith("\n")


def test_generators_are_deterministic():
    assert gen_random_walk_trace(5, 10_000) == gen_random_walk_trace(5, 10_000)
    assert gen_random_walk_trace(5, 10_000) != gen_random_walk_trace(6, 10_000)


def test_random_walk_stays_in_band():
    tr = gen_random_walk_trace(2018, 60_000)
    assert tr.period_ms == 60_000
    assert 0.6 <= tr.mean_rate_mbps <= 24


def test_on_off_has_dead_periods():
    tr = gen_on_off_trace(12, on_ms=400, off_ms=100, cycles=2)
    assert tr.period_ms == 1400
    assert not any(400 < t <= 500 for t in tr.opportunities)
    assert len(tr) == 3 * 400


def test_invalid_linktrace():
    with pytest.raises(TraceError):
        LinkTrace((), 1)
    with pytest.raises(TraceError):
        LinkTrace((3, 2), 5)
