"""Road graph construction/validation, mobility traces and file round-trips."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanetsim.roadnet import (Intersection, MobilityTrace, RoadGraph,
                              RoadGraphError, Segment, TraceError,
                              generate_grid, make_grid_graph)


def test_grid_graph_has_expected_intersections_and_is_valid():
    graph = make_grid_graph(800.0, 800.0, 200.0)
    assert len(graph.intersections) == 5 * 5
    graph.validate()
    # interior intersections have degree 4
    g = graph.as_networkx()
    degrees = sorted(d for _, d in g.degree())
    assert degrees[0] == 2 and degrees[-1] == 4


def test_grid_graph_rejects_oversized_blocks():
    with pytest.raises(RoadGraphError):
        make_grid_graph(100.0, 100.0, 200.0)


def test_validate_rejects_duplicate_intersections():
    graph = RoadGraph([Intersection(0, 0.0, 0.0), Intersection(1, 0.0, 0.0)],
                      [Segment(0, 0, 1, 0.0, 14.0)])
    with pytest.raises(RoadGraphError, match="duplicate"):
        graph.validate()


def test_validate_rejects_dangling_segment_reference():
    graph = RoadGraph([Intersection(0, 0.0, 0.0), Intersection(1, 100.0, 0.0)],
                      [Segment(0, 0, 7, 100.0, 14.0)])
    with pytest.raises(RoadGraphError, match="missing"):
        graph.validate()


def test_validate_rejects_wrong_segment_length():
    graph = RoadGraph([Intersection(0, 0.0, 0.0), Intersection(1, 100.0, 0.0)],
                      [Segment(0, 0, 1, 55.0, 14.0)])
    with pytest.raises(RoadGraphError):
        graph.validate()


def test_validate_rejects_disconnected_graph():
    graph = RoadGraph(
        [Intersection(0, 0.0, 0.0), Intersection(1, 100.0, 0.0),
         Intersection(2, 500.0, 500.0), Intersection(3, 600.0, 500.0)],
        [Segment(0, 0, 1, 100.0, 14.0), Segment(1, 2, 3, 100.0, 14.0)])
    with pytest.raises(RoadGraphError, match="connected"):
        graph.validate()


def test_nearest_intersection_matches_brute_force():
    graph = make_grid_graph(1000.0, 600.0, 200.0)
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = (float(rng.uniform(0, 1000)), float(rng.uniform(0, 600)))
        best = min(graph.intersections.values(),
                   key=lambda i: math.hypot(i.x - p[0], i.y - p[1]))
        nid, dist = graph.nearest_intersection(p)
        found = graph.intersections[nid]
        assert math.isclose(dist, math.hypot(found.x - p[0], found.y - p[1]))
        assert math.isclose(dist, math.hypot(best.x - p[0], best.y - p[1]))


def test_is_at_intersection_radius_boundary():
    graph = make_grid_graph(400.0, 400.0, 200.0)
    corner = graph.intersections[0]
    assert graph.is_at_intersection((corner.x + 5.0, corner.y), radius=5.0)
    assert not graph.is_at_intersection((corner.x + 5.1, corner.y), radius=5.0)
    with pytest.raises(ValueError):
        graph.is_at_intersection((0.0, 0.0), radius=0.0)


def test_graph_file_round_trip(tmp_path):
    graph = make_grid_graph(600.0, 400.0, 200.0)
    path = tmp_path / "grid.graph"
    graph.to_file(str(path))
    loaded = RoadGraph.from_file(str(path))
    loaded.validate()
    assert {(i.id, i.x, i.y) for i in loaded.intersections.values()} == \
        {(i.id, i.x, i.y) for i in graph.intersections.values()}
    assert [(s.id, s.a, s.b) for s in loaded.segments] == \
        [(s.id, s.a, s.b) for s in graph.segments]


def test_trace_interpolates_between_samples():
    trace = MobilityTrace()
    trace.add(0.0, "v0", 0.0, 0.0, 10.0)
    trace.add(2.0, "v0", 20.0, 0.0, 10.0)
    (x, y), speed = trace.position_at("v0", 1.0)
    assert (x, y) == (10.0, 0.0)
    assert speed == 10.0
    assert trace.span("v0") == (0.0, 2.0)


def test_trace_rejects_queries_outside_the_recorded_span():
    trace = MobilityTrace()
    trace.add(1.0, "v0", 0.0, 0.0, 5.0)
    trace.add(2.0, "v0", 5.0, 0.0, 5.0)
    with pytest.raises(TraceError):
        trace.position_at("v0", 0.5)
    with pytest.raises(TraceError):
        trace.position_at("v0", 2.5)
    with pytest.raises(TraceError):
        trace.position_at("missing", 1.5)


def test_trace_times_must_strictly_increase():
    trace = MobilityTrace()
    trace.add(1.0, "v0", 0.0, 0.0, 5.0)
    with pytest.raises(TraceError):
        trace.add(1.0, "v0", 1.0, 0.0, 5.0)


def test_trace_file_round_trip(tmp_path):
    trace = MobilityTrace()
    trace.add(0.0, "v0", 1.5, 2.5, 3.0)
    trace.add(1.0, "v0", 4.5, 2.5, 3.0)
    trace.add(0.5, "v1", 9.0, 9.0, 0.0)
    path = tmp_path / "trace.csv"
    trace.to_file(str(path))
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "time,node_id,x,y,speed"
    loaded = MobilityTrace.from_file(str(path))
    assert sorted(loaded.nodes) == ["v0", "v1"]
    assert loaded.position_at("v0", 0.5) == ((3.0, 2.5), 3.0)


def test_trace_file_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,node,x,y\n0,v0,1,2\n", encoding="utf-8")
    with pytest.raises(TraceError):
        MobilityTrace.from_file(str(path))


def test_generate_grid_population_matches_density():
    graph, trace = generate_grid(800.0, 800.0, 200.0, 30.0, seed=0, duration=5.0)
    area_km2 = 0.8 * 0.8
    assert abs(len(trace.nodes) - 30.0 * area_km2) <= 1.0
    graph.validate()


def test_generate_grid_is_deterministic_per_seed():
    _, a = generate_grid(600.0, 600.0, 200.0, 25.0, seed=5, duration=4.0)
    _, b = generate_grid(600.0, 600.0, 200.0, 25.0, seed=5, duration=4.0)
    _, c = generate_grid(600.0, 600.0, 200.0, 25.0, seed=6, duration=4.0)
    node = a.nodes[0]
    assert a.position_at(node, 2.0) == b.position_at(node, 2.0)
    assert any(a.position_at(n, 2.0) != c.position_at(n, 2.0) for n in a.nodes)


@given(seed=st.integers(min_value=0, max_value=50),
       t=st.floats(min_value=0.0, max_value=4.0, allow_nan=False))
def test_generated_positions_stay_on_the_map(seed, t):
    _, trace = generate_grid(600.0, 400.0, 200.0, 20.0, seed=seed, duration=4.0)
    for node in trace.nodes:
        (x, y), speed = trace.position_at(node, t)
        assert -1e-6 <= x <= 600.0 + 1e-6
        assert -1e-6 <= y <= 400.0 + 1e-6
        assert speed >= 0.0
