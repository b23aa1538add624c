import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carldtn.links import Link, detect_link_events, in_range, range_matrix, scan_links
from carldtn.mobility import (Fleet, MobilityModel, WaypointGraph, grid_graph, initial_state,
                              step_movement)


class ScriptedRandom:
    """Returns queued values from ``uniform`` (all random waypoint draws)."""

    def __init__(self, values):
        self.values = list(values)

    def uniform(self, a, b):
        return self.values.pop(0)


RWP = MobilityModel("rwp", speed=(5.0, 5.0), pause=(10.0, 10.0), bounds=(100.0, 100.0))


def test_rwp_reaches_waypoint_at_speed():
    rng = ScriptedRandom([30.0, 40.0, 5.0, 10.0])
    st_ = initial_state(RWP, rng, 0.0, (0.0, 0.0))
    step_movement(st_, 4.0, RWP, rng)
    assert st_.position() == pytest.approx((12.0, 16.0))
    step_movement(st_, 6.0, RWP, rng)
    assert st_.position() == pytest.approx((30.0, 40.0))


def test_rwp_pauses_at_waypoint():
    rng = ScriptedRandom([30.0, 40.0, 5.0, 10.0, 30.0, 0.0, 5.0, 10.0])
    st_ = initial_state(RWP, rng, 0.0, (0.0, 0.0))
    step_movement(st_, 10.0, RWP, rng)
    assert st_.pause_remaining == pytest.approx(10.0)
    step_movement(st_, 5.0, RWP, rng)
    assert st_.position() == pytest.approx((30.0, 40.0))
    assert st_.pause_remaining == pytest.approx(5.0)
    step_movement(st_, 13.0, RWP, rng)  # 5 s of pause left, then 8 s toward (30, 0)
    assert st_.position() == pytest.approx((30.0, 0.0))


def test_nonpositive_step_is_a_no_op():
    rng = ScriptedRandom([30.0, 40.0, 5.0])
    st_ = initial_state(RWP, rng, 0.0, (0.0, 0.0))
    step_movement(st_, 4.0, RWP, rng)
    before = st_.position()
    step_movement(st_, 0.0, RWP, rng)
    step_movement(st_, -3.0, RWP, rng)
    assert st_.position() == before and st_.now == 4.0


def test_static_nodes_never_move():
    m = MobilityModel("static", bounds=(100.0, 100.0))
    st_ = initial_state(m, random.Random(1), 0.0, (20.0, 30.0))
    step_movement(st_, 1e6, m, random.Random(1))
    assert st_.position() == (20.0, 30.0)


def test_model_validation():
    with pytest.raises(ValueError):
        MobilityModel("teleport")
    with pytest.raises(ValueError):
        MobilityModel("rwp", speed=(0.0, 1.0))
    with pytest.raises(ValueError):
        MobilityModel("rwp", pause=(5.0, 1.0))


@settings(max_examples=30)
@given(seed=st.integers(0, 2**31), variant=st.sampled_from(["rwp", "rwk", "graph"]))
def test_fleet_stays_inside_world(seed, variant):
    w, h = 200.0, 120.0
    m = MobilityModel(variant, speed=(1.0, 20.0), pause=(0.0, 5.0), bounds=(w, h),
                      leg=(10.0, 80.0), graph="grid:3x4")
    rngs = [random.Random(seed + i) for i in range(5)]
    fleet = Fleet([m] * 5, rngs)
    for t in np.arange(0.0, 300.0, 3.7):
        pos = fleet.advance(float(t))
        assert (pos[:, 0] >= 0).all() and (pos[:, 0] <= w).all()
        assert (pos[:, 1] >= 0).all() and (pos[:, 1] <= h).all()


@settings(max_examples=20)
@given(seed=st.integers(0, 2**31))
def test_graph_nodes_stay_on_roads(seed):
    m = MobilityModel("graph", speed=(2.0, 8.0), pause=(0.0, 3.0), bounds=(300.0, 200.0),
                      graph="grid:3x4")
    fleet = Fleet([m] * 3, [random.Random(seed + i) for i in range(3)])
    xs, ys = np.linspace(0, 300, 4), np.linspace(0, 200, 3)
    for t in np.arange(0.0, 400.0, 7.3):
        for x, y in fleet.advance(float(t)):
            on_v = np.isclose(x, xs, atol=1e-6).any()
            on_h = np.isclose(y, ys, atol=1e-6).any()
            assert on_v or on_h


def test_grid_graph_shortest_path_is_manhattan():
    g = grid_graph("grid:4x4", 300.0, 300.0)
    path = g.path(0, 15)
    length = sum(math.dist(g.points[u], g.points[v]) for u, v in zip(path, path[1:]))
    assert length == pytest.approx(600.0)


def test_disconnected_graph_is_rejected():
    with pytest.raises(ValueError):
        WaypointGraph({0: (0, 0), 1: (1, 1), 2: (2, 2)}, [(0, 1)])


# ---- links -----------------------------------------------------------------------------------


def test_distance_equal_to_range_is_connected():
    pos = np.array([[0.0, 0.0], [30.0, 0.0], [30.0 + 1e-9, 0.0]])
    adj = in_range(pos, 900.0)
    assert adj[0, 1] and not adj[0, 2]


def test_three_nodes_in_range_give_three_link_ups():
    pos = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    live = np.zeros((3, 3), dtype=bool)
    events, adj = detect_link_events(pos, 30.0, live, 0.0)
    assert [(e.up, e.a, e.b) for e in events] == [(True, 0, 1), (True, 0, 2), (True, 1, 2)]
    pos[2] = (100.0, 100.0)
    events, _ = detect_link_events(pos, 30.0, adj, 1.0)
    assert [(e.up, e.a, e.b) for e in events] == [(False, 0, 2), (False, 1, 2)]


@given(pts=st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=2, max_size=8),
       pts2=st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=8, max_size=8))
def test_compiled_scan_agrees_with_reference(pts, pts2):
    n = len(pts)
    r2 = range_matrix(np.full(n, 30.0))
    live = np.zeros((n, n), dtype=bool)
    for p in (np.array(pts), np.array(pts2[:n])):
        ref, new = detect_link_events(p, r2, live, 0.0)
        got = scan_links(p, r2, live.copy())
        assert [(bool(u), a, b) for a, b, u in got.tolist()] == [(e.up, e.a, e.b) for e in ref]
        live = new


def test_pair_uses_shorter_radio():
    r2 = range_matrix(np.array([10.0, 50.0]))
    assert r2[0, 1] == 100.0


def test_link_normalises_and_rejects_self_loops():
    assert Link(5, 2, 0.0, 1.0).key == (2, 5)
    with pytest.raises(ValueError):
        Link(3, 3, 0.0, 1.0)
