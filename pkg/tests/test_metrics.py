import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vamsim.metrics import (
    AwarenessWindow,
    Broadcast,
    MetricLog,
    account_messages,
    compute_awareness,
    compute_igg,
    compute_ipg,
    distance_bin,
    evaluation_times,
    ipg_igg_by_bin,
    metric_rows,
    per_receiver_awareness,
    summarize,
    write_rows,
)


def periodic_log(period=3.0, n=10, lost=(), delay=0.001, distance=50.0, start=0.0):
    """Station 0 sends every ``period``; station 1 receives what is not lost."""
    log = MetricLog(start, start + period * n, (0, 1))
    for k in range(n):
        g = start + k * period
        log.add_generation(0, g)
        rx = () if k in lost else (1,)
        log.add_broadcast(Broadcast(g + delay, 0, g, (), rx, (distance,) * len(rx)))
    return log


def test_ipg_example():
    log = MetricLog(0, 10, (0, 1))
    for t in (1.0, 4.0, 7.0):
        log.add_broadcast(Broadcast(t, 0, t, (), (1,), (10.0,)))
    assert compute_ipg(log, (1, 0)) == pytest.approx([3.0, 3.0])


def test_lossless_periodic_ipg():
    assert np.mean(compute_ipg(periodic_log(), (1, 0))) == pytest.approx(3.0)


def test_every_other_frame_lost_doubles_ipg():
    log = periodic_log(n=11, lost=(1, 3, 5, 7, 9))
    assert np.mean(compute_ipg(log, (1, 0))) == pytest.approx(6.0)


def test_short_histories_give_no_gaps():
    log = periodic_log(n=1)
    assert compute_ipg(log, (1, 0)) == [] and compute_igg(log, 0) == []
    assert compute_igg(log, 1) == []


def test_igg_of_stationary_sender():
    log = MetricLog(0, 30, (0,))
    for t in (0.0, 5.0, 10.0, 15.0):
        log.add_generation(0, t)
    assert compute_igg(log, 0) == [5.0, 5.0, 5.0]


def test_generations_must_be_ordered():
    log = MetricLog(0, 10, (0,))
    log.add_generation(0, 2.0)
    with pytest.raises(ValueError):
        log.add_generation(0, 1.0)


def test_matched_igg_recovers_period_under_loss():
    (n, ipg, igg), = ipg_igg_by_bin(periodic_log(n=20, lost=(2, 3, 7, 11))).values()
    assert igg == pytest.approx(3.0)
    assert ipg > igg


def test_distance_bins():
    assert [distance_bin(d) for d in (0.0, 99.9, 100.0, 450.0)] == [0, 0, 1, 4]


@given(
    st.lists(st.floats(0.1, 5.0), min_size=2, max_size=40),
    st.lists(st.booleans(), min_size=40, max_size=40),
)
def test_mean_ipg_never_below_matched_igg(gaps, keep):
    log = MetricLog(0, 1e6, (0, 1))
    t = 0.0
    for g, k in zip([0.0] + gaps, keep):
        t += g
        log.add_generation(0, t)
        rx = (1,) if k else ()
        log.add_broadcast(Broadcast(t + 0.001, 0, t, (), rx, (20.0,) * len(rx)))
    bins = ipg_igg_by_bin(log)
    for n, ipg, igg in bins.values():
        assert ipg >= igg - 1e-9


def test_awareness_all_standalone_lossless():
    log = MetricLog(0, 30, (0, 1, 2))
    for s in range(3):
        for k in range(11):
            t = 0.5 * s + 3.0 * k
            log.add_broadcast(Broadcast(t, s, t, (), ((s + 1) % 3,), (5.0,)))
    times = evaluation_times(log)
    assert compute_awareness(log, times) == [1.0] * len(times)


def test_awareness_silent_network():
    log = MetricLog(0, 30, (0, 1))
    assert compute_awareness(log, [5.0, 10.0]) == [0.0, 0.0]


def test_vicarious_coverage_makes_cluster_visible():
    log = MetricLog(0, 30, tuple(range(6)))
    for k in range(15):
        t = 2.0 * k
        log.add_broadcast(Broadcast(t, 0, t, (1, 2, 3, 4, 5), (1, 2, 3, 4, 5), (2.0,) * 5))
    times = evaluation_times(log)
    assert compute_awareness(log, times) == [1.0] * len(times)
    assert compute_awareness(log, times, vicarious=False) == [pytest.approx(1 / 6)] * len(times)


def test_undelivered_broadcast_gives_no_awareness():
    log = MetricLog(0, 10, (0,))
    log.add_broadcast(Broadcast(1.0, 0, 1.0, (), (), ()))
    assert compute_awareness(log, [2.0]) == [0.0]


def test_awareness_window_is_strict():
    log = MetricLog(0, 10, (0, 1))
    log.add_broadcast(Broadcast(1.0, 0, 1.0, (), (1,), (5.0,)))
    assert compute_awareness(log, [3.99, 4.0]) == [0.5, 0.0]


def test_awareness_argument_checks():
    with pytest.raises(ValueError):
        compute_awareness(MetricLog(0, 1, ()), [0.5])
    with pytest.raises(ValueError):
        compute_awareness(MetricLog(0, 1, (0,)), [0.5], window=0)
    with pytest.raises(ValueError):
        AwarenessWindow(0.0)


@given(st.lists(st.tuples(st.floats(0, 30), st.integers(0, 4)), max_size=40), st.floats(0.5, 5), st.floats(0.5, 5))
def test_awareness_bounded_and_monotone_in_window(events, w1, w2):
    log = MetricLog(0, 30, tuple(range(5)))
    for t, s in sorted(events):
        log.add_broadcast(Broadcast(t, s, t, (), ((s + 1) % 5,), (1.0,)))
    times = [3.0 + k for k in range(28)]
    lo, hi = sorted((w1, w2))
    a, b = compute_awareness(log, times, lo), compute_awareness(log, times, hi)
    assert all(0.0 <= x <= 1.0 for x in a + b)
    assert all(x <= y for x, y in zip(a, b))


def test_per_receiver_awareness():
    log = MetricLog(0, 10, (0, 1, 2))
    log.add_broadcast(Broadcast(4.0, 0, 4.0, (), (1,), (10.0,)))
    log.snapshot_times = [5.0]
    log.snapshot_positions = [np.array([[0.0, 0.0], [10.0, 0.0], [500.0, 0.0]])]
    # receiver 1 hears 0 of its one neighbour; receiver 0 heard nothing of 1; 2 has no neighbours
    assert per_receiver_awareness(log) == [pytest.approx(0.5)]


def test_evaluation_times():
    log = MetricLog(100.0, 160.0, (0,))
    times = evaluation_times(log)
    assert times[0] == 103.0 and times[-1] == 160.0 and len(times) == 58


def test_accounting():
    assert account_messages("standalone") == 60
    assert account_messages("implicitCluster") == 10
    assert [account_messages("etsiCluster", confirm_batches=b) for b in range(1, 6)] == [18, 19, 20, 21, 22]
    with pytest.raises(ValueError):
        account_messages("etsiCluster", confirm_batches=6)
    with pytest.raises(ValueError):
        account_messages("flooding")


def test_summarize():
    s = summarize([3.0] * 4)
    assert s.mean == 3.0 and s.half_width == 0.0
    s = summarize([2.0, 4.0])
    assert s.mean == 3.0
    # t(0.975, 1) = 12.706, sd = sqrt(2), n = 2
    assert s.half_width == pytest.approx(12.706 * math.sqrt(2) / math.sqrt(2), rel=1e-3)
    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    s = summarize(x)
    assert s.half_width / (np.std(x, ddof=1) / math.sqrt(5)) == pytest.approx(2.776, abs=1e-3)
    one = summarize([7.0])
    assert one.interval is None and "n/a" in str(one)
    assert summarize([]).n == 0


def test_csv_rows_are_deterministic(tmp_path):
    log = periodic_log(n=12, lost=(4,))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rows = metric_rows("standalone", 0, log)
    write_rows(a, rows["ipg.csv"])
    write_rows(b, metric_rows("standalone", 0, log)["ipg.csv"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "scheme,repetition,key,value"
    assert set(rows) == {"generations.csv", "ipg.csv", "igg.csv", "awareness.csv"}
