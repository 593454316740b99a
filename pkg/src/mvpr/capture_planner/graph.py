"""Weighted undirected street multigraph."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from ..errors import ContractViolation, InputError
from ..geo import LocalProjection

LENGTH_TOL = 1e-6


def polyline_length(points) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        total += math.hypot(x1 - x0, y1 - y0)
    return total


@dataclass(frozen=True)
class StreetEdge:
    a: int
    b: int
    length: float
    polyline: tuple  # ((x, y), ...) from a to b, endpoints included
    is_transfer: bool = False


@dataclass
class StreetGraph:
    """Undirected multigraph: nodes are 2D points, edges carry polylines."""

    nodes: dict[int, tuple[float, float]]
    edges: list[StreetEdge]
    projection: LocalProjection | None = None

    def __post_init__(self):
        for i, e in enumerate(self.edges):
            if e.a not in self.nodes or e.b not in self.nodes:
                raise InputError(f"edge {i} references unknown node")
            if e.length <= 0:
                raise InputError(f"edge {i} has non-positive length {e.length}")
            arc = polyline_length(e.polyline)
            if abs(arc - e.length) > LENGTH_TOL:
                raise InputError(
                    f"edge {i} length {e.length} != polyline arc length {arc}"
                )

    @classmethod
    def from_segments(cls, nodes, segments, projection=None) -> "StreetGraph":
        """Build from (a, b, polyline) triples, lengths from the polylines."""
        edges = [
            StreetEdge(a=a, b=b, length=polyline_length(poly), polyline=tuple(map(tuple, poly)))
            for a, b, poly in segments
        ]
        return cls(nodes=dict(nodes), edges=edges, projection=projection)

    def adjacency(self) -> dict[int, list[tuple[int, int]]]:
        """node -> sorted list of (edge_index, other_endpoint)."""
        adj: dict[int, list[tuple[int, int]]] = {n: [] for n in self.nodes}
        for i, e in enumerate(self.edges):
            adj[e.a].append((i, e.b))
            if e.a != e.b:
                adj[e.b].append((i, e.a))
        for lst in adj.values():
            lst.sort()
        return adj

    def degrees(self) -> dict[int, int]:
        deg = {n: 0 for n in self.nodes}
        for e in self.edges:
            deg[e.a] += 1
            deg[e.b] += 1  # self-loops count twice
        return deg

    def connected_components(self) -> list[list[int]]:
        """Components over nodes that touch at least one edge, each sorted."""
        adj = self.adjacency()
        seen: set[int] = set()
        components = []
        for start in sorted(self.nodes):
            if start in seen or not adj[start]:
                continue
            stack = [start]
            comp = []
            seen.add(start)
            while stack:
                n = stack.pop()
                comp.append(n)
                for _, other in adj[n]:
                    if other not in seen:
                        seen.add(other)
                        stack.append(other)
            components.append(sorted(comp))
        return components

    def total_edge_length(self) -> float:
        return sum(e.length for e in self.edges)


def odd_degree_nodes(g: StreetGraph) -> list[int]:
    """Nodes of odd total degree, ascending. Always even-sized (handshake)."""
    return sorted(n for n, d in g.degrees().items() if d % 2 == 1)


def all_pairs_shortest(g: StreetGraph, sources) -> dict[int, tuple[dict, dict]]:
    """Dijkstra from each source node.

    Returns source -> (dist, pred) where dist maps reachable nodes to
    distance and pred maps them to (previous node, edge index); missing
    nodes are unreachable (infinite distance).
    """
    adj = g.adjacency()
    out = {}
    for src in sources:
        if src not in g.nodes:
            raise ContractViolation(f"unknown source node {src}")
        dist = {src: 0.0}
        pred: dict[int, tuple[int, int]] = {}
        done: set[int] = set()
        heap = [(0.0, src)]
        while heap:
            d, n = heapq.heappop(heap)
            if n in done:
                continue
            done.add(n)
            for edge_idx, other in adj[n]:
                nd = d + g.edges[edge_idx].length
                if nd < dist.get(other, math.inf):
                    dist[other] = nd
                    pred[other] = (n, edge_idx)
                    heapq.heappush(heap, (nd, other))
        out[src] = (dist, pred)
    return out


def shortest_path_edges(pred: dict, src: int, dst: int) -> list[int]:
    """Edge indices along the tree path src -> dst, in traversal order."""
    path = []
    n = dst
    while n != src:
        prev, edge_idx = pred[n]
        path.append(edge_idx)
        n = prev
    path.reverse()
    return path
