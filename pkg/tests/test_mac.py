import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import simulated, timeline
from v2xperf.mac import (
    MacPhyParams,
    Node,
    adjudicate_reception,
    contention_gap,
    run_simulation,
    sense_busy,
)
from v2xperf.radio import Radio

RADIO = Radio()
STRICT = MacPhyParams(cam_jitter=0.0)
# Short period so several CAMs of different stations interact.
DENSE = MacPhyParams(cam_rate=1e6 / 1500, cam_jitter=0.0)
AIFS, AIRTIME, SLOT = STRICT.aifs, STRICT.airtime, STRICT.slot


def test_derived_timing():
    assert AIFS == 32 + 7 * 13 == 123
    assert STRICT.eifs_gap == 120 + 7 * 13
    assert MacPhyParams(eifs_mode="append").eifs_gap == 123 + 120
    assert AIRTIME == 40 + 600
    assert STRICT.cam_period == 100_000


def test_contention_gap():
    assert contention_gap(STRICT, False) == AIFS
    assert contention_gap(STRICT, True) == STRICT.eifs_gap


@pytest.mark.parametrize("kw", [dict(slot=0), dict(cw_min=-1), dict(eifs_mode="x"),
                                dict(cam_jitter=1.0), dict(slot=13.5)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        MacPhyParams(**kw)


def test_lone_node_one_second():
    recs = run_simulation([Node(0, 0.0)], duration=1.0, seed=3)
    assert len(recs) == 10
    assert all(r.delay == 0 and not r.collided and not r.dropped for r in recs)


def test_every_cam_yields_one_record():
    nodes = [Node(i, 10.0 * i) for i in range(12)]
    recs = run_simulation(nodes, cams_per_node=7, seed=1)
    assert len(recs) == 12 * 7
    assert sorted((r.tx_node, r.seq) for r in recs) == [(i, k) for i in range(12) for k in range(7)]


def test_same_seed_same_output():
    nodes = [Node(i, 7.0 * i, receiver=None) for i in range(20)]
    a = run_simulation(nodes, duration=0.5, seed=11)
    b = run_simulation(nodes, duration=0.5, seed=11)
    c = run_simulation(nodes, duration=0.5, seed=12)
    assert a == b
    assert a != c


@pytest.mark.parametrize("bad", [dict(nodes=[]), dict(duration=0.0), dict(loss_receivers="x")])
def test_simulation_rejects_bad_input(bad):
    kw = dict(nodes=[Node(0, 0.0)], duration=1.0)
    kw.update(bad)
    with pytest.raises(ValueError):
        run_simulation(**kw)


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        run_simulation([Node(0, 0.0), Node(0, 5.0)], duration=1.0)


def test_request_on_idle_channel_is_immediate():
    nodes = [Node(0, 0.0, first_request=0), Node(1, 50.0, first_request=AIRTIME + AIFS)]
    recs = simulated(nodes, STRICT, RADIO, 1, {0: [9], 1: [9]})
    assert [r["delay"] for r in recs] == [0, 0]


def test_request_during_airtime_is_collided():
    nodes = [Node(0, 0.0, first_request=0), Node(1, 50.0, first_request=200)]
    r = simulated(nodes, STRICT, RADIO, 1, {0: [0], 1: [4]})[1]
    assert r["collided"] and r["delay"] > 0
    assert r["granted_at"] == AIRTIME + AIFS + 4 * SLOT


def test_request_during_trailing_aifs_is_delayed_not_collided():
    nodes = [Node(0, 0.0, first_request=0), Node(1, 50.0, first_request=AIRTIME + 10)]
    r = simulated(nodes, STRICT, RADIO, 1, {0: [0], 1: [2]})[1]
    assert r["delay"] > 0 and not r["collided"]
    assert r["granted_at"] == AIRTIME + AIFS + 2 * SLOT


def test_two_colocated_deferrers_smaller_draw_first_all_pairs():
    """Both stations request during a third station's frame; for every pair of draws
    the smaller one wins, the other freezes and resumes with the remainder."""
    nodes = [Node(2, 0.0, first_request=0), Node(0, 0.0, first_request=100),
             Node(1, 0.0, first_request=100)]
    for a, b in itertools.product(range(16), repeat=2):
        recs = {r["tx_node"]: r for r in simulated(nodes, STRICT, RADIO, 1, {0: [a], 1: [b], 2: [0]})}
        first = AIRTIME + AIFS + min(a, b) * SLOT
        assert recs[0]["collided"] and recs[1]["collided"]
        if a == b:
            assert recs[0]["granted_at"] == recs[1]["granted_at"] == first
        else:
            lo, hi = (0, 1) if a < b else (1, 0)
            assert recs[lo]["granted_at"] == first
            assert recs[hi]["granted_at"] == first + AIRTIME + AIFS + abs(a - b) * SLOT


def test_eifs_after_undecodable_sensed_frame():
    # station 1 sits 150 m from 0: senses its frame but cannot decode it
    nodes = [Node(0, 0.0, first_request=0), Node(1, 150.0, first_request=100)]
    r = simulated(nodes, STRICT, RADIO, 1, {0: [0], 1: [3]})[1]
    assert r["granted_at"] == AIRTIME + STRICT.eifs_gap + 3 * SLOT


def test_hidden_station_is_not_deferred():
    nodes = [Node(0, 0.0, first_request=0), Node(1, 200.0, first_request=100)]
    r = simulated(nodes, STRICT, RADIO, 1, {0: [0], 1: [3]})[1]
    assert r["delay"] == 0


def test_sense_busy_examples():
    assert not sense_busy((0.0, 0.0), [(176.0, 0.0)], RADIO)
    assert sense_busy((0.0, 0.0), [(60.0, 0.0)], RADIO)
    assert not sense_busy((0.0, 0.0), [], RADIO)


def test_adjudicate_reception_examples():
    assert adjudicate_reception((0.0, 0.0), (15.0, 0.0), [], RADIO)
    assert not adjudicate_reception((0.0, 0.0), (120.0, 0.0), [], RADIO)
    # two hidden senders 176 m apart, receiver midway
    assert not adjudicate_reception((0.0, 0.0), (88.0, 0.0), [(176.0, 0.0)], RADIO)


def test_hidden_overlap_corrupts_both_frames():
    nodes = [Node(0, 0.0, first_request=0, receiver=9), Node(1, 200.0, first_request=100, receiver=9),
             Node(9, 100.0, transmits=False)]
    recs = simulated(nodes, STRICT, RADIO, 1, {0: [0], 1: [0]})
    assert [r["received_ok"][9] for r in recs] == [False, False]


def test_queue_drops_stale_cam():
    # a saturated neighborhood with a tiny period forces drop-old replacement
    p = MacPhyParams(cam_rate=1e6 / 700, cam_jitter=0.0)
    nodes = [Node(i, 0.0, first_request=0) for i in range(6)]
    recs = run_simulation(nodes, p, RADIO, cams_per_node=20, seed=0)
    assert any(r.dropped for r in recs)
    assert all(r.granted_at is None for r in recs if r.dropped)


# ---- exhaustive and randomized agreement with the brute-force timeline

GEOMETRIES = {
    "colocated": [0.0, 0.0],
    "in_range": [0.0, 80.0],
    "sense_only": [0.0, 150.0],
    "hidden": [0.0, 200.0],
}


@pytest.mark.parametrize("name", sorted(GEOMETRIES))
def test_two_node_first_draws_exhaustive(name):
    xs = GEOMETRIES[name]
    rng = random.Random(name)
    tail = {0: [rng.randint(0, 15) for _ in range(20)], 1: [rng.randint(0, 15) for _ in range(20)]}
    nodes = [Node(0, xs[0], first_request=0, receiver=9), Node(1, xs[1], first_request=200, receiver=9),
             Node(9, 40.0, transmits=False)]
    for a, b in itertools.product(range(16), repeat=2):
        draws = {0: [a] + tail[0], 1: [b] + tail[1]}
        assert simulated(nodes, DENSE, RADIO, 2, draws) == timeline(nodes, DENSE, RADIO, 2, draws), (a, b)


positions = st.sampled_from([0.0, 50.0, 115.0, 150.0, 175.0, 200.0, 300.0]) | st.floats(0.0, 350.0)


@settings(max_examples=150, deadline=None)
@given(
    xs=st.lists(positions, min_size=2, max_size=3),
    starts=st.lists(st.integers(0, 800), min_size=3, max_size=3),
    cams=st.integers(1, 5),
    rx=st.floats(0.0, 300.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_random_scenarios_match_timeline(xs, starts, cams, rx, seed):
    rng = random.Random(seed)
    nodes = [Node(i, x, first_request=starts[i], receiver=9) for i, x in enumerate(xs)]
    nodes.append(Node(9, rx, transmits=False))
    draws = {i: [rng.randint(0, 15) for _ in range(40)] for i in range(len(xs))}
    assert simulated(nodes, DENSE, RADIO, cams, draws) == timeline(nodes, DENSE, RADIO, cams, draws)


@pytest.fixture(scope="module")
def busy_run():
    nodes = [Node(i, float(x), receiver=None) for i, x in
             enumerate(random.Random(3).choices(range(0, 400, 7), k=40))]
    return nodes, run_simulation(nodes, duration=1.0, seed=8)


def test_delay_invariants(busy_run):
    _, recs = busy_run
    assert all(r.delay >= 0 for r in recs)
    assert not any(r.delay == 0 and r.collided for r in recs)
    by_node = {}
    for r in recs:
        by_node.setdefault(r.tx_node, []).append(r)
    for rs in by_node.values():
        assert sum(r.delay > 0 for r in rs) >= sum(r.collided for r in rs)


def test_sensing_stations_overlap_only_in_same_slot(busy_run):
    nodes, recs = busy_run
    x = {nd.id: nd.x for nd in nodes}
    sent = sorted((r.granted_at, r.tx_node) for r in recs if r.granted_at is not None)
    for k, (t1, a) in enumerate(sent):
        for t2, b in sent[k + 1:]:
            if t2 >= t1 + AIRTIME:
                break
            if RADIO.senses(RADIO.rx_power(max(abs(x[a] - x[b]), 1.0))):
                assert t1 == t2, (a, b, t1, t2)
