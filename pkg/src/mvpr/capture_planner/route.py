"""Street-route planning: duplicate odd-pair paths, extract an Eulerian
circuit, and sample equally spaced camera viewpoints along it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import InputError
from .graph import (
    StreetEdge,
    StreetGraph,
    all_pairs_shortest,
    odd_degree_nodes,
    polyline_length,
    shortest_path_edges,
)
from .matching import min_weight_perfect_matching

DEFAULT_SPACING_M = 10.0


@dataclass(frozen=True)
class RouteStep:
    edge: StreetEdge
    forward: bool  # traversed a -> b when True
    edge_index: int | None  # index into the source graph, None for transfers

    @property
    def is_transfer(self) -> bool:
        return self.edge.is_transfer

    def points(self):
        return self.edge.polyline if self.forward else tuple(reversed(self.edge.polyline))


@dataclass
class RoutePath:
    steps: list[RouteStep]
    total_length: float
    polyline: list[tuple[float, float]]
    matching_exact: bool | None  # None when no odd-node matching was needed

    def edge_visit_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for s in self.steps:
            if s.edge_index is not None:
                counts[s.edge_index] = counts.get(s.edge_index, 0) + 1
        return counts


@dataclass(frozen=True)
class SampledViewpoint:
    xy: tuple[float, float]
    heading: float  # radians, 0 = north, clockwise; tangent of the path
    arc_position: float  # meters from the start of the route


def _euler_circuit(component_nodes, instances, adjacency, start):
    """Hierholzer over explicit edge instances; returns instance id order."""
    ptr = {n: 0 for n in component_nodes}
    used = [False] * len(instances)
    stack = [start]
    trail_edges: list[int] = []
    edge_stack: list[int] = []
    while stack:
        v = stack[-1]
        found = None
        while ptr[v] < len(adjacency[v]):
            inst_id, other = adjacency[v][ptr[v]]
            if used[inst_id]:
                ptr[v] += 1
                continue
            found = (inst_id, other)
            break
        if found is None:
            stack.pop()
            if edge_stack:
                trail_edges.append(edge_stack.pop())
        else:
            inst_id, other = found
            used[inst_id] = True
            stack.append(other)
            edge_stack.append(inst_id)
    trail_edges.reverse()
    return trail_edges


def _plan_component(g: StreetGraph, comp: list[int]) -> tuple[list[RouteStep], bool | None]:
    comp_set = set(comp)
    edge_ids = [i for i, e in enumerate(g.edges) if e.a in comp_set]
    odd = [n for n in odd_degree_nodes(g) if n in comp_set]

    duplicated: list[int] = []
    exact: bool | None = None
    if odd:
        shortest = all_pairs_shortest(g, odd)
        dist = {src: shortest[src][0] for src in odd}
        matching = min_weight_perfect_matching(odd, dist)
        exact = matching.exact
        for a, b in matching.pairs:
            duplicated.extend(shortest_path_edges(shortest[a][1], a, b))

    # explicit multigraph instances: originals then duplicates
    instances = edge_ids + duplicated
    adjacency: dict[int, list[tuple[int, int]]] = {n: [] for n in comp}
    for inst_id, edge_idx in enumerate(instances):
        e = g.edges[edge_idx]
        adjacency[e.a].append((inst_id, e.b))
        if e.a != e.b:
            adjacency[e.b].append((inst_id, e.a))
    for lst in adjacency.values():
        lst.sort()

    start = comp[0]
    trail = _euler_circuit(comp, instances, adjacency, start)
    steps = []
    at = start
    for inst_id in trail:
        e = g.edges[instances[inst_id]]
        forward = e.a == at
        steps.append(RouteStep(edge=e, forward=forward, edge_index=instances[inst_id]))
        at = e.b if forward else e.a
    return steps, exact


def plan_route(g: StreetGraph) -> RoutePath:
    """Shortest closed walk covering every edge of each component.

    Disconnected graphs are solved per component; components are chained
    with straight transfer segments that are excluded from capture.
    """
    if not g.edges:
        raise InputError("cannot plan a route on an empty graph")
    components = g.connected_components()

    steps: list[RouteStep] = []
    exact_flags = []
    for comp in components:
        comp_steps, exact = _plan_component(g, comp)
        if steps:
            prev_end = steps[-1].points()[-1]
            nxt_start = comp_steps[0].points()[0]
            gap = math.hypot(nxt_start[0] - prev_end[0], nxt_start[1] - prev_end[1])
            if gap > 0:
                transfer = StreetEdge(
                    a=-1, b=-1, length=gap,
                    polyline=(prev_end, nxt_start), is_transfer=True,
                )
                steps.append(RouteStep(edge=transfer, forward=True, edge_index=None))
        steps.extend(comp_steps)
        if exact is not None:
            exact_flags.append(exact)

    polyline: list[tuple[float, float]] = []
    total = 0.0
    for s in steps:
        pts = s.points()
        if polyline:
            pts = pts[1:]
        polyline.extend(pts)
        total += s.edge.length
    matching_exact = None if not exact_flags else all(exact_flags)
    return RoutePath(steps=steps, total_length=total, polyline=polyline,
                     matching_exact=matching_exact)


def _segments(path: RoutePath):
    """(start_arc, p0, p1, seg_len, is_transfer) per polyline segment."""
    segs = []
    arc = 0.0
    for s in path.steps:
        pts = s.points()
        for p0, p1 in zip(pts, pts[1:]):
            seg_len = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
            if seg_len == 0.0:
                continue
            segs.append((arc, p0, p1, seg_len, s.is_transfer))
            arc += seg_len
    return segs, arc


def segment_heading(p0, p1) -> float:
    """Tangent direction as yaw: 0 = north (+y), clockwise positive."""
    return math.atan2(p1[0] - p0[0], p1[1] - p0[1]) % (2.0 * math.pi)


def sample_path(
    path: RoutePath, spacing: float = DEFAULT_SPACING_M, skip_transfer: bool = True
) -> list[SampledViewpoint]:
    """Viewpoints at arc positions 0, spacing, 2*spacing, ... <= total length.

    A sample exactly on a polyline vertex takes the heading of the segment
    being entered; the final route point keeps the last segment's heading.
    """
    if spacing <= 0:
        raise InputError("spacing must be positive")
    segs, total = _segments(path)
    if not segs:
        return []
    samples = []
    seg_i = 0
    k = 0
    while True:
        s = k * spacing
        if s > total:
            break
        while seg_i < len(segs) - 1 and s >= segs[seg_i][0] + segs[seg_i][3]:
            seg_i += 1
        start_arc, p0, p1, seg_len, is_transfer = segs[seg_i]
        if not (skip_transfer and is_transfer):
            frac = (s - start_arc) / seg_len
            xy = (p0[0] + frac * (p1[0] - p0[0]), p0[1] + frac * (p1[1] - p0[1]))
            samples.append(
                SampledViewpoint(xy=xy, heading=segment_heading(p0, p1), arc_position=s)
            )
        k += 1
    return samples


def route_to_geojson(path: RoutePath, projection) -> dict:
    coords = [list(projection.to_geo(x, y)[::-1]) for x, y in path.polyline]
    return {
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": coords},
        "properties": {
            "total_length_m": path.total_length,
            "matching_exact": path.matching_exact,
        },
    }


def write_route_geojson(path: RoutePath, projection, out_path) -> None:
    Path(out_path).write_text(json.dumps(route_to_geojson(path, projection), indent=1))


def write_viewpoints_csv(samples, projection, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "lat", "lon", "x_m", "y_m", "heading_rad", "arc_m"])
        for i, s in enumerate(samples):
            lat, lon = projection.to_geo(*s.xy)
            w.writerow([i, repr(lat), repr(lon), repr(s.xy[0]), repr(s.xy[1]),
                        repr(s.heading), repr(s.arc_position)])


def read_viewpoints_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"index", "lat", "lon", "x_m", "y_m", "heading_rad", "arc_m"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InputError(f"{path}: viewpoint CSV must have columns {sorted(required)}")
        for row in reader:
            rows.append(
                {
                    "index": int(row["index"]),
                    "lat": float(row["lat"]),
                    "lon": float(row["lon"]),
                    "x_m": float(row["x_m"]),
                    "y_m": float(row["y_m"]),
                    "heading_rad": float(row["heading_rad"]),
                    "arc_m": float(row["arc_m"]),
                }
            )
    return rows
