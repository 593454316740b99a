"""Minimum-weight perfect matching on odd-degree street nodes.

Up to EXACT_LIMIT nodes the matching is solved exactly with a bitmask DP
(O(2^n * n)); larger inputs fall back to greedy nearest-pair construction
plus 2-opt pair swaps. The result says which solver ran.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ContractViolation

EXACT_LIMIT = 18


@dataclass(frozen=True)
class MatchingResult:
    pairs: tuple[tuple[int, int], ...]
    cost: float
    exact: bool


def _pair_cost(dist, a, b) -> float:
    d = dist[a].get(b, math.inf)
    if not math.isfinite(d):
        raise ContractViolation(f"infinite distance between odd nodes {a} and {b}")
    return d


def _dp_matching(nodes, dist) -> list[tuple[int, int]]:
    n = len(nodes)
    full = (1 << n) - 1
    cost = [math.inf] * (full + 1)
    choice: list[tuple[int, int] | None] = [None] * (full + 1)
    cost[0] = 0.0
    for mask in range(1, full + 1):
        if bin(mask).count("1") % 2:
            continue
        i = (mask & -mask).bit_length() - 1  # always pair the lowest set bit
        rest = mask ^ (1 << i)
        j = rest
        while j:
            k = (j & -j).bit_length() - 1
            j &= j - 1
            prev = rest ^ (1 << k)
            c = cost[prev] + _pair_cost(dist, nodes[i], nodes[k])
            if c < cost[mask]:
                cost[mask] = c
                choice[mask] = (i, k)
    pairs = []
    mask = full
    while mask:
        i, k = choice[mask]
        pairs.append((nodes[i], nodes[k]))
        mask ^= (1 << i) | (1 << k)
    pairs.sort()
    return pairs


def _greedy_matching(nodes, dist) -> list[tuple[int, int]]:
    remaining = list(nodes)
    pairs = []
    while remaining:
        a = remaining.pop(0)
        best_j = min(
            range(len(remaining)), key=lambda j: (_pair_cost(dist, a, remaining[j]), j)
        )
        b = remaining.pop(best_j)
        pairs.append((a, b))
    return pairs


def _two_opt(pairs, dist) -> list[tuple[int, int]]:
    pairs = [tuple(p) for p in pairs]
    improved = True
    while improved:
        improved = False
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                a, b = pairs[i]
                c, d = pairs[j]
                current = _pair_cost(dist, a, b) + _pair_cost(dist, c, d)
                swap1 = _pair_cost(dist, a, c) + _pair_cost(dist, b, d)
                swap2 = _pair_cost(dist, a, d) + _pair_cost(dist, b, c)
                if swap1 < current - 1e-12 and swap1 <= swap2:
                    pairs[i], pairs[j] = (a, c), (b, d)
                    improved = True
                elif swap2 < current - 1e-12:
                    pairs[i], pairs[j] = (a, d), (b, c)
                    improved = True
    return pairs


def min_weight_perfect_matching(odd: list[int], dist) -> MatchingResult:
    """Pair up the odd nodes; `dist` maps node -> {node: distance}."""
    if len(odd) % 2:
        raise ContractViolation(f"cannot perfectly match {len(odd)} nodes")
    nodes = sorted(odd)
    if not nodes:
        return MatchingResult(pairs=(), cost=0.0, exact=True)
    if len(nodes) <= EXACT_LIMIT:
        pairs = _dp_matching(nodes, dist)
        exact = True
    else:
        pairs = _two_opt(_greedy_matching(nodes, dist), dist)
        exact = False
    cost = sum(_pair_cost(dist, a, b) for a, b in pairs)
    return MatchingResult(pairs=tuple(pairs), cost=cost, exact=exact)
