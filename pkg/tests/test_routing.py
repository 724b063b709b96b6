"""Geographic forwarding: greedy/perimeter correctness against brute-force
oracles, multimetric scoring, and the self-configuring weight update."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanetsim.routing import (MetricVector, MetricWeights, NeighborEntry,
                              PerimeterDrop, PerimeterState, dsw_update,
                              equal_weights, gabriel_neighbors,
                              gpsr_greedy_next, gpsr_perimeter_next,
                              heading_of, multimetric_score, normalize_metrics,
                              select_forwarder)


def dist(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


# --- greedy mode ------------------------------------------------------------

def test_greedy_matches_exhaustive_search_on_random_placements():
    rng = np.random.default_rng(17)
    radio_range = 250.0
    for _ in range(200):
        pts = {f"n{i:02d}": (float(rng.uniform(0, 1000)), float(rng.uniform(0, 1000)))
               for i in range(50)}
        current = pts.pop("n00")
        dest = (float(rng.uniform(0, 1000)), float(rng.uniform(0, 1000)))
        neighbors = {nid: p for nid, p in pts.items()
                     if dist(current, p) <= radio_range}
        choice = gpsr_greedy_next(current, neighbors, dest)
        closer = {nid: dist(p, dest) for nid, p in neighbors.items()
                  if dist(p, dest) < dist(current, dest)}
        if not closer:
            assert choice is None
        else:
            expected = min(sorted(closer), key=lambda nid: closer[nid])
            assert choice == expected


def test_greedy_requires_strict_progress():
    current = (0.0, 0.0)
    dest = (100.0, 0.0)
    same_distance = {"a": (0.0, 0.0), "b": (200.0, 0.0)}
    assert gpsr_greedy_next(current, same_distance, dest) is None


def test_greedy_breaks_ties_by_lowest_id():
    current = (0.0, 0.0)
    dest = (100.0, 0.0)
    neighbors = {"b": (50.0, 10.0), "a": (50.0, -10.0)}
    assert gpsr_greedy_next(current, neighbors, dest) == "a"


# --- planarization and perimeter mode ---------------------------------------

def test_gabriel_removes_edges_witnessed_by_a_midpoint_node():
    current = (0.0, 0.0)
    neighbors = {"far": (2.0, 0.0), "near": (1.0, 0.0)}
    assert gabriel_neighbors("c", current, neighbors) == ["near"]


def test_gabriel_keeps_unwitnessed_edges():
    current = (0.0, 0.0)
    neighbors = {"e": (1.0, 0.0), "n": (0.0, 1.0)}
    assert gabriel_neighbors("c", current, neighbors) == ["e", "n"]


def route_packet(nodes, source, dest_id, radio_range, max_hops=200):
    """Greedy forwarding with perimeter recovery over a static placement.

    Returns the node where the packet ended up, or raises PerimeterDrop.
    """
    current = source
    state = None
    for _ in range(max_hops):
        if current == dest_id:
            return current
        pos = nodes[current]
        neighbors = {nid: p for nid, p in nodes.items()
                     if nid != current and dist(pos, p) <= radio_range}
        if state is not None and dist(pos, nodes[dest_id]) < state.entry_distance:
            state = None   # recovered: closer than where greedy failed
        if state is None:
            nxt = gpsr_greedy_next(pos, neighbors, nodes[dest_id])
            if nxt is not None:
                current = nxt
                continue
            state = PerimeterState(entry_point=pos,
                                   entry_distance=dist(pos, nodes[dest_id]))
        nxt = gpsr_perimeter_next(current, pos, neighbors, nodes[dest_id], state)
        state.came_from = current
        current = nxt
    raise AssertionError("routing did not terminate")


def c_shaped_void():
    """Nodes on the rim of a rectangular void that opens away from the
    destination; greedy stalls at the mid-left rim and must tour the face."""
    nodes = {"src": (40.0, 200.0), "dst": (560.0, 200.0)}
    rim = []
    for x in range(180, 421, 60):        # top and bottom rims
        rim.append((float(x), 120.0))
        rim.append((float(x), 280.0))
    for y in range(120, 281, 80):        # left and right rims
        rim.append((180.0, float(y)))
        rim.append((420.0, float(y)))
    for i, p in enumerate(sorted(set(rim))):
        nodes[f"r{i:02d}"] = p
    nodes["bridge-w"] = (110.0, 200.0)   # connects src to the left rim
    nodes["bridge-e"] = (490.0, 200.0)   # connects the right rim to dst
    return nodes


def test_perimeter_mode_routes_around_a_void():
    nodes = c_shaped_void()
    # sanity: greedy alone stalls before reaching the destination
    stall = nodes["bridge-w"]
    neighbors = {nid: p for nid, p in nodes.items()
                 if nid != "bridge-w" and dist(stall, p) <= 100.0}
    blocked = gpsr_greedy_next(stall, neighbors, nodes["dst"])
    assert blocked is None or dist(nodes[blocked], nodes["dst"]) < dist(stall, nodes["dst"])
    assert route_packet(nodes, "src", "dst", radio_range=100.0) == "dst"


def test_straight_chain_never_needs_perimeter_mode():
    nodes = {f"c{i}": (i * 80.0, 0.0) for i in range(6)}
    nodes["dst"] = (480.0, 0.0)
    assert route_packet(nodes, "c0", "dst", radio_range=100.0) == "dst"


def test_perimeter_drop_when_tour_closes_or_no_planar_neighbor():
    with pytest.raises(PerimeterDrop):
        gpsr_perimeter_next("x", (0.0, 0.0), {}, (10.0, 0.0),
                            PerimeterState((0.0, 0.0), 10.0))
    # a pair cut off from the destination bounces until the face tour closes
    nodes = {"a": (0.0, 0.0), "b": (50.0, 0.0), "island": (500.0, 0.0)}
    with pytest.raises(PerimeterDrop, match="entry edge"):
        route_packet(nodes, "a", "island", radio_range=60.0)


# --- multimetric selection --------------------------------------------------

def test_heading_of_normalizes_velocity():
    assert heading_of((3.0, 4.0)) == (0.6, 0.8)
    assert heading_of((0.0, 0.0)) == (0.0, 0.0)


def entry(pos, *, speed=0.0, heading=(0.0, 0.0), density=50.0,
          abe=3e6, mac=0.1):
    return NeighborEntry("n", pos, speed, heading, density, abe, mac, 0.0)


def test_normalize_metrics_hand_fixture():
    current, dest = (0.0, 0.0), (200.0, 0.0)
    v = normalize_metrics(entry((100.0, 0.0), speed=10.0, heading=(1.0, 0.0)),
                          current, dest, bitrate=6e6)
    assert abs(v.m_dist - 0.5) < 1e-12       # halves the remaining distance
    assert abs(v.m_density - 0.5) < 1e-12    # 50 of the 100/km2 reference
    assert v.m_traj == 1.0                   # moving toward the destination
    assert abs(v.m_abe - 0.5) < 1e-12        # half the nominal bitrate free
    assert abs(v.m_mac - 0.9) < 1e-12


def test_normalize_metrics_clamps_to_unit_interval():
    current, dest = (0.0, 0.0), (100.0, 0.0)
    v = normalize_metrics(entry((300.0, 0.0), density=500.0, abe=9e6,
                                speed=5.0, heading=(1.0, 0.0)),
                          current, dest, bitrate=6e6)
    assert v.m_dist == 0.0 and v.m_density == 1.0 and v.m_abe == 1.0
    assert v.m_traj == 0.0                   # receding from the destination


def test_multimetric_score_is_the_weighted_sum():
    v = MetricVector(1.0, 0.0, 0.5, 0.0, 0.5)
    w = MetricWeights(0.4, 0.1, 0.2, 0.1, 0.2)
    assert abs(multimetric_score(v, w) - (0.4 + 0.1 + 0.1)) < 1e-12


def test_select_forwarder_argmax_with_id_ties():
    assert select_forwarder({}) is None
    assert select_forwarder({"a": 0.2, "b": 0.9}) == "b"
    assert select_forwarder({"b": 0.5, "a": 0.5}) == "a"


def test_multimetric_reduces_to_greedy_when_only_distance_varies():
    current, dest = (0.0, 0.0), (400.0, 0.0)
    positions = {"a": (120.0, 30.0), "b": (200.0, 0.0), "c": (90.0, -40.0),
                 "d": (250.0, 60.0), "e": (60.0, 0.0)}
    entries = {nid: entry(p) for nid, p in positions.items()}
    w = equal_weights()
    scores = {nid: multimetric_score(
        normalize_metrics(ent, current, dest, bitrate=6e6), w)
        for nid, ent in entries.items()}
    assert select_forwarder(scores) == gpsr_greedy_next(current, positions, dest)


# --- dynamic weight self-configuration --------------------------------------

def vec(*vals):
    return MetricVector(*vals)


def test_weight_update_needs_at_least_two_snapshots():
    assert dsw_update([], equal_weights()) == equal_weights()
    assert dsw_update([vec(1, 1, 1, 1, 1)], equal_weights()) == equal_weights()


def test_weight_update_keeps_equal_weights_without_variation():
    snaps = [vec(0.5, 0.5, 0.5, 0.5, 0.5)] * 4
    w = dsw_update(snaps, equal_weights(), lam=0.7)
    assert all(abs(x - 0.2) < 1e-12 for x in w.as_tuple())


def test_weight_update_concentrates_on_the_only_varying_metric():
    snaps = [vec(0.1, 0.5, 0.5, 0.5, 0.5), vec(0.9, 0.5, 0.5, 0.5, 0.5)]
    w = dsw_update(snaps, equal_weights(), lam=1.0)
    assert abs(w.w_dist - 0.8) < 1e-12
    for other in (w.w_density, w.w_traj, w.w_abe, w.w_mac):
        assert abs(other - 0.05) < 1e-12


def test_weight_update_with_zero_smoothing_keeps_previous_weights():
    prev = MetricWeights(0.4, 0.15, 0.15, 0.15, 0.15)
    snaps = [vec(0.1, 0.5, 0.2, 0.9, 0.5), vec(0.7, 0.1, 0.8, 0.2, 0.4)]
    w = dsw_update(snaps, prev, lam=0.0)
    for got, want in zip(w.as_tuple(), prev.as_tuple()):
        assert abs(got - want) < 1e-12


def test_weights_check_rejects_bad_vectors():
    with pytest.raises(ValueError):
        MetricWeights(0.5, 0.2, 0.2, 0.2, 0.2).check()   # sums to 1.1
    with pytest.raises(ValueError):
        MetricWeights(0.9, 0.04, 0.02, 0.02, 0.02).check()  # below the floor


metric_value = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
snapshot = st.builds(MetricVector, metric_value, metric_value, metric_value,
                     metric_value, metric_value)


@given(st.lists(snapshot, min_size=2, max_size=8),
       st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
       st.lists(st.floats(min_value=1e-6, max_value=1.0, allow_nan=False),
                min_size=5, max_size=5))
def test_weight_update_always_restores_the_invariants(snaps, lam, raw_prev):
    total = sum(raw_prev)
    floor = 0.05
    prev_vals = [floor + (1.0 - 5 * floor) * r / total for r in raw_prev]
    prev = MetricWeights(*prev_vals, w_floor=floor)
    w = dsw_update(snaps, prev, lam=lam)
    assert abs(sum(w.as_tuple()) - 1.0) < 1e-9
    assert all(x >= floor - 1e-12 for x in w.as_tuple())
    w.check()
