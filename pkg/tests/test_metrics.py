import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from v2xperf.mac import Node, PacketRecord, run_simulation
from v2xperf.metrics import (
    MetricsError,
    PerfMetrics,
    aggregate,
    correlation,
    per_node,
    two_sample_close,
)


def rec(delay=0, collided=False, ok=None, node=0):
    return PacketRecord(node, 0, 0, delay, delay, collided, ok or {})


def test_all_zero_delays():
    assert aggregate([rec() for _ in range(5)]).as_tuple() == (0.0, 0.0, 0.0, 0.0)


def test_counting_definition():
    recs = [rec(100, True) for _ in range(24)] + [rec(50) for _ in range(6)] + [rec() for _ in range(270)]
    m = aggregate(recs)
    assert m.p_delay == pytest.approx(0.1)
    assert m.p_collision == pytest.approx(0.08)
    assert m.mean_delay == pytest.approx((24 * 100 + 6 * 50) / 30)
    assert aggregate(recs, delayed_only=False).mean_delay == pytest.approx((24 * 100 + 6 * 50) / 300)


def test_loss_counts_receiver_outcomes():
    recs = [rec(ok={1: True}), rec(ok={1: False}), rec(ok={1: True, 2: False}), rec()]
    assert aggregate(recs).p_loss == pytest.approx(2 / 4)


def test_lone_transmitter_no_loss():
    recs = run_simulation([Node(0, 0.0, receiver=1), Node(1, 15.0, transmits=False)], duration=1.0)
    assert aggregate(recs, 0).p_loss == 0.0


def test_node_selection():
    recs = [rec(node=0), rec(10, node=1), rec(20, node=2)]
    assert aggregate(recs, 1).mean_delay == 10
    assert aggregate(recs, {1, 2}).mean_delay == 15
    assert set(per_node(recs)) == {0, 1, 2}
    with pytest.raises(MetricsError):
        aggregate(recs, 7)


def test_metric_validation():
    with pytest.raises(MetricsError):
        PerfMetrics(p_loss=1.5)
    with pytest.raises(MetricsError):
        PerfMetrics(mean_delay=-1.0)
    assert PerfMetrics.mean_of([PerfMetrics(0.2, 0.2, 0, 10), PerfMetrics(0.4, 0.4, 0, 30)]) == \
        PerfMetrics(0.30000000000000004, 0.30000000000000004, 0.0, 20.0)


def test_correlation_examples():
    assert correlation([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert correlation([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    # hand evaluation: sxy = 4.2, sxx = 2, syy = 8.82667 -> 0.99962
    syy = (2 - 61 / 15) ** 2 + (4 - 61 / 15) ** 2 + (6.2 - 61 / 15) ** 2
    assert correlation([1, 2, 3], [2, 4, 6.2]) == pytest.approx(4.2 / np.sqrt(2 * syy), abs=1e-12)
    assert correlation([1, 2, 3], [2, 4, 6.2]) == pytest.approx(0.99962, abs=1e-5)
    with pytest.raises(MetricsError):
        correlation([1, 1, 1], [1, 2, 3])


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=30), st.floats(0.1, 10), st.floats(-5, 5))
def test_correlation_affine_invariant(xs, a, b):
    x = np.array(xs)
    if np.ptp(x) < 1e-6:
        return
    assert correlation(x, a * x + b) == pytest.approx(1.0, abs=1e-9)


def test_two_sample_close_examples():
    assert two_sample_close([5, 6], [5, 6], 0.0)
    assert not two_sample_close([100], [112], 0.10)
    assert two_sample_close([100], [108], 0.10)
