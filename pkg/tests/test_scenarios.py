import math

import pytest

from v2xperf.scenarios import (
    ScenarioSpec,
    build_collocated,
    build_hidden_sweep,
    build_highway,
)


def test_collocated_geometry():
    s = build_collocated(40, 60.0)
    assert s.transmitter == 0 and len(s.neighbors) == 40
    by_id = {nd.id: nd for nd in s.nodes}
    assert all((by_id[k].x, by_id[k].y) == (60.0, 0.0) for k in s.neighbors)
    probe = by_id[s.receivers[0]]
    assert not probe.transmits and math.hypot(probe.x, probe.y) == 15.0


def test_lone_transmitter():
    s = build_collocated(0, 0.0)
    assert len(s.transmitting) == 1


@pytest.mark.parametrize("sep", [0.0, 60.0, 220.0])
def test_hidden_sweep_symmetry(sep):
    s = build_hidden_sweep(80, sep)
    by_id = {nd.id: nd for nd in s.nodes}
    xs = sorted(by_id[k].x for k in s.neighbors)
    assert xs[:40] == [-sep / 2] * 40 and xs[40:] == [sep / 2] * 40
    tx, rx = by_id[0], by_id[1]
    assert tx.x + rx.x == 0.0


def test_hidden_sweep_groups_hidden_at_220():
    s = build_hidden_sweep(80, 220.0)
    assert 220.0 > 175.0
    assert {nd.x for nd in s.nodes if nd.id >= 2} == {-110.0, 110.0}


def test_hidden_sweep_rejects_odd():
    with pytest.raises(ValueError):
        build_hidden_sweep(81, 0.0)


def test_highway_shape_and_determinism():
    a = build_highway(600.0, 3, 150, seed=4)
    b = build_highway(600.0, 3, 150, seed=4)
    c = build_highway(600.0, 3, 150, seed=5)
    assert a.nodes == b.nodes and a.nodes != c.nodes
    obus = a.transmitting
    assert len(obus) == 150 and len(a.nodes) == 300
    for nd in obus:
        assert 0.0 <= nd.x <= 600.0 and 0.0 <= nd.y <= 6 * 3.5
        probe = a.nodes[nd.receiver]
        assert not probe.transmits
        assert math.hypot(probe.x - nd.x, probe.y - nd.y) <= 15.0 + 1e-9
        assert 0.0 <= probe.x <= 600.0 and 0.0 <= probe.y <= 21.0


def test_highway_lanes_are_centred():
    s = build_highway(1500.0, 3, 500, seed=0)
    ys = {nd.y for nd in s.transmitting}
    assert ys == {(k + 0.5) * 3.5 for k in range(6)}


def test_spec_builds_each_kind():
    assert len(ScenarioSpec("collocated", n_neighbors=3).build().nodes) == 5
    assert len(ScenarioSpec("hidden_sweep", total_neighbors=4).build().nodes) == 6
    assert len(ScenarioSpec("highway", n_obu=10, length=100.0).build().nodes) == 20
    with pytest.raises(ValueError):
        ScenarioSpec("ring")
