"""Urban road graph, synthetic grid scenarios, and mobility trace playback."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import networkx as nx
import numpy as np

DEFAULT_INTERSECTION_RADIUS = 10.0  # meters, closed boundary
ON_ROAD_TOLERANCE = 0.5  # meters
OBSTACLE_INSET = 5.0  # meters from street centerline to building face
PEDESTRIAN_SPEED = 1.4  # m/s nominal walking speed


@dataclass(frozen=True)
class Intersection:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Segment:
    id: int
    a: int  # endpoint intersection id
    b: int
    length: float
    speed_limit: float


class RoadGraphError(ValueError):
    pass


class RoadGraph:
    """Intersections, segments, and optional axis-aligned building obstacles."""

    def __init__(self, intersections: Iterable[Intersection],
                 segments: Iterable[Segment],
                 obstacles: Iterable[tuple[float, float, float, float]] = ()):
        self.intersections = {i.id: i for i in intersections}
        self.segments = list(segments)
        self.obstacles = [tuple(map(float, o)) for o in obstacles]
        self._ids = np.array(sorted(self.intersections), dtype=np.int64)
        self._coords = np.array(
            [[self.intersections[i].x, self.intersections[i].y] for i in self._ids],
            dtype=float,
        ).reshape(-1, 2)
        self._nx: Optional[nx.Graph] = None

    def validate(self) -> None:
        if not self.intersections:
            raise RoadGraphError("graph has no intersections")
        seen_coords = set()
        for node in self.intersections.values():
            key = (node.x, node.y)
            if key in seen_coords:
                raise RoadGraphError(f"duplicate intersection coordinates {key}")
            seen_coords.add(key)
        for seg in self.segments:
            if seg.a not in self.intersections or seg.b not in self.intersections:
                raise RoadGraphError(f"segment {seg.id} references missing intersection")
            pa, pb = self.intersections[seg.a], self.intersections[seg.b]
            d = math.hypot(pa.x - pb.x, pa.y - pb.y)
            if abs(d - seg.length) > 1e-6:
                raise RoadGraphError(
                    f"segment {seg.id} length {seg.length} != endpoint distance {d}"
                )
        if not nx.is_connected(self.as_networkx()):
            raise RoadGraphError("road graph is not connected")

    def as_networkx(self) -> nx.Graph:
        if self._nx is None:
            g = nx.Graph()
            g.add_nodes_from(self.intersections)
            for seg in self.segments:
                g.add_edge(seg.a, seg.b, weight=seg.length, segment=seg.id)
            self._nx = g
        return self._nx

    def nearest_intersection(self, p: tuple[float, float]) -> tuple[int, float]:
        """Closest intersection by Euclidean distance; ties broken by lowest id."""
        d = np.hypot(self._coords[:, 0] - p[0], self._coords[:, 1] - p[1])
        best = d.min()
        # ids array is sorted, so the first index at the minimum is the lowest id
        idx = int(np.flatnonzero(d == best)[0])
        return int(self._ids[idx]), float(best)

    def is_at_intersection(self, p: tuple[float, float],
                           radius: float = DEFAULT_INTERSECTION_RADIUS) -> bool:
        if radius <= 0:
            raise ValueError("radius must be positive")
        return self.nearest_intersection(p)[1] <= radius

    # --- file format: plain text sections, '#' comments ---

    def to_file(self, path: str) -> None:
        lines = ["# road graph", "[intersections]", "# id x y"]
        for i in sorted(self.intersections):
            node = self.intersections[i]
            lines.append(f"{node.id} {node.x!r} {node.y!r}")
        lines += ["[segments]", "# id a b length speed_limit"]
        for seg in self.segments:
            lines.append(f"{seg.id} {seg.a} {seg.b} {seg.length!r} {seg.speed_limit!r}")
        lines += ["[obstacles]", "# xmin ymin xmax ymax"]
        for o in self.obstacles:
            lines.append(" ".join(repr(v) for v in o))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str) -> "RoadGraph":
        section = None
        intersections, segments, obstacles = [], [], []
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if line.startswith("["):
                    section = line.strip("[]")
                    continue
                parts = line.split()
                if section == "intersections":
                    intersections.append(
                        Intersection(int(parts[0]), float(parts[1]), float(parts[2])))
                elif section == "segments":
                    segments.append(Segment(int(parts[0]), int(parts[1]), int(parts[2]),
                                            float(parts[3]), float(parts[4])))
                elif section == "obstacles":
                    obstacles.append(tuple(float(v) for v in parts))
                else:
                    raise RoadGraphError(f"line outside a known section: {line!r}")
        graph = cls(intersections, segments, obstacles)
        graph.validate()
        return graph


class TraceError(ValueError):
    pass


class MobilityTrace:
    """Per-node timestamped position/speed records with linear interpolation."""

    def __init__(self) -> None:
        self._records: dict[str, tuple[list[float], list[float], list[float], list[float]]] = {}

    def add(self, t: float, node: str, x: float, y: float, speed: float) -> None:
        times, xs, ys, speeds = self._records.setdefault(node, ([], [], [], []))
        if times and t <= times[-1]:
            raise TraceError(f"times must strictly increase for node {node}")
        times.append(t)
        xs.append(x)
        ys.append(y)
        speeds.append(speed)

    @property
    def nodes(self) -> list[str]:
        return list(self._records)

    def span(self, node: str) -> tuple[float, float]:
        times = self._records[node][0]
        return times[0], times[-1]

    def position_at(self, node: str, t: float) -> tuple[tuple[float, float], float]:
        if node not in self._records:
            raise TraceError(f"no trace records for node {node}")
        times, xs, ys, speeds = self._records[node]
        if t < times[0] or t > times[-1]:
            raise TraceError(
                f"t={t} outside trace span [{times[0]}, {times[-1]}] for node {node}")
        i = bisect.bisect_right(times, t) - 1
        if i == len(times) - 1:
            return (xs[i], ys[i]), speeds[i]
        frac = (t - times[i]) / (times[i + 1] - times[i])
        x = xs[i] + frac * (xs[i + 1] - xs[i])
        y = ys[i] + frac * (ys[i + 1] - ys[i])
        v = speeds[i] + frac * (speeds[i + 1] - speeds[i])
        return (x, y), v

    def to_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("time,node_id,x,y,speed\n")
            rows = []
            for node, (times, xs, ys, speeds) in self._records.items():
                for k in range(len(times)):
                    rows.append((times[k], node, xs[k], ys[k], speeds[k]))
            rows.sort(key=lambda r: (r[0], r[1]))
            for t, node, x, y, v in rows:
                fh.write(f"{t!r},{node},{x!r},{y!r},{v!r}\n")

    @classmethod
    def from_file(cls, path: str) -> "MobilityTrace":
        trace = cls()
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "time,node_id,x,y,speed":
                raise TraceError(f"bad trace header: {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                t, node, x, y, v = line.split(",")
                trace.add(float(t), node, float(x), float(y), float(v))
        return trace


def make_grid_graph(area_width: float, area_height: float, block_size: float,
                    speed_limit: float = 14.0,
                    with_obstacles: bool = False) -> RoadGraph:
    """Manhattan grid covering the area with streets every block_size meters."""
    if block_size >= min(area_width, area_height):
        raise RoadGraphError("block_size must be smaller than both area dimensions")
    nx_cols = int(area_width // block_size) + 1
    ny_rows = int(area_height // block_size) + 1
    intersections = []
    for j in range(ny_rows):
        for i in range(nx_cols):
            intersections.append(
                Intersection(j * nx_cols + i, i * block_size, j * block_size))
    segments = []
    sid = 0
    for j in range(ny_rows):
        for i in range(nx_cols):
            node = j * nx_cols + i
            if i + 1 < nx_cols:
                segments.append(Segment(sid, node, node + 1, block_size, speed_limit))
                sid += 1
            if j + 1 < ny_rows:
                segments.append(Segment(sid, node, node + nx_cols, block_size, speed_limit))
                sid += 1
    obstacles = []
    if with_obstacles:
        for j in range(ny_rows - 1):
            for i in range(nx_cols - 1):
                x0 = i * block_size + OBSTACLE_INSET
                y0 = j * block_size + OBSTACLE_INSET
                x1 = (i + 1) * block_size - OBSTACLE_INSET
                y1 = (j + 1) * block_size - OBSTACLE_INSET
                if x1 > x0 and y1 > y0:
                    obstacles.append((x0, y0, x1, y1))
    graph = RoadGraph(intersections, segments, obstacles)
    graph.validate()
    return graph


def _random_trips(graph: RoadGraph, rng: np.random.Generator, node: str,
                  duration: float, dt: float, speed_lo: float, speed_hi: float,
                  trace: MobilityTrace) -> None:
    """Shortest-path trips between random intersections, resampled on a dt grid."""
    g = graph.as_networkx()
    ids = sorted(graph.intersections)
    # start at a random point along a random segment so the initial placement
    # is uniform over street length, not clustered at junctions
    seg = graph.segments[int(rng.integers(len(graph.segments)))]
    pa = graph.intersections[seg.a]
    pb = graph.intersections[seg.b]
    frac = float(rng.uniform())
    start = (pa.x + frac * (pb.x - pa.x), pa.y + frac * (pb.y - pa.y))
    current = seg.b if rng.uniform() < 0.5 else seg.a
    points: list[tuple[float, float]] = [start]
    speeds: list[float] = []
    first = graph.intersections[current]
    first_speed = float(rng.uniform(speed_lo, speed_hi))
    d0 = math.hypot(first.x - start[0], first.y - start[1])
    total_time = 0.0
    if d0 > 0:
        points.append((first.x, first.y))
        speeds.append(first_speed)
        total_time += d0 / first_speed
    while total_time < duration:
        dest = current
        while dest == current:
            dest = int(rng.choice(ids))
        path = nx.shortest_path(g, current, dest, weight="weight")
        speed = float(rng.uniform(speed_lo, speed_hi))
        for hop in path[1:]:
            p = graph.intersections[hop]
            prev = points[-1]
            d = math.hypot(p.x - prev[0], p.y - prev[1])
            points.append((p.x, p.y))
            speeds.append(speed)
            total_time += d / speed
        current = dest
    # walk the polyline, emitting samples every dt
    t = 0.0
    leg = 0
    leg_pos = 0.0
    x, y = points[0]
    last_emitted = -1.0
    while t <= duration + 1e-9 and leg < len(speeds):
        trace.add(round(t, 6), node, x, y, speeds[leg])
        last_emitted = round(t, 6)
        advance = speeds[leg] * dt
        t += dt
        while advance > 0 and leg < len(speeds):
            ax, ay = points[leg]
            bx, by = points[leg + 1]
            leg_len = math.hypot(bx - ax, by - ay)
            remain = leg_len - leg_pos
            if advance < remain:
                leg_pos += advance
                advance = 0.0
            else:
                advance -= remain
                leg += 1
                leg_pos = 0.0
        if leg < len(speeds):
            ax, ay = points[leg]
            bx, by = points[leg + 1]
            leg_len = math.hypot(bx - ax, by - ay)
            frac = leg_pos / leg_len if leg_len > 0 else 0.0
            x = ax + frac * (bx - ax)
            y = ay + frac * (by - ay)
    if last_emitted < duration:
        v = speeds[-1] if speeds else 0.0
        trace.add(duration + 1e-6, node, x, y, v)


def generate_grid(area_width: float, area_height: float, block_size: float,
                  density: float, seed: int, *,
                  duration: float = 60.0, dt: float = 0.5,
                  speed_limit: float = 14.0, with_obstacles: bool = False,
                  kind: str = "vehicle",
                  pedestrian_count: int = 0) -> tuple[RoadGraph, MobilityTrace]:
    """Synthetic grid scenario: Manhattan graph plus random-trip mobility.

    Vehicle count is round(density * area_km2).  Vehicles follow shortest-path
    trips between random intersections; pedestrians (when requested) do the
    same at walking speed.  Deterministic under the seed.
    """
    if density <= 0 and pedestrian_count <= 0:
        raise RoadGraphError("density must be positive")
    if area_width <= 0 or area_height <= 0:
        raise RoadGraphError("area must have positive dimensions")
    graph = make_grid_graph(area_width, area_height, block_size,
                            speed_limit, with_obstacles)
    area_km2 = area_width * area_height / 1e6
    n_vehicles = int(round(density * area_km2)) if density > 0 else 0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        entropy=int(seed), spawn_key=(0x6d0b,))))
    trace = MobilityTrace()
    for v in range(n_vehicles):
        _random_trips(graph, rng, f"{kind}{v}", duration, dt,
                      0.5 * speed_limit, speed_limit, trace)
    for p in range(pedestrian_count):
        _random_trips(graph, rng, f"ped{p}", duration, dt,
                      0.8 * PEDESTRIAN_SPEED, 1.2 * PEDESTRIAN_SPEED, trace)
    return graph, trace
