"""Exact k-nearest-neighbor search over the descriptor store.

Distances are Euclidean in float64, computed blockwise; ordering ties
break toward the lower row id. On unit vectors this ranking matches
cosine similarity exactly (d^2 = 2 - 2 cos).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation
from .store import DescriptorStore

SCAN_BLOCK_ROWS = 8192


@dataclass
class RetrievalResult:
    query_geo: tuple[float, float]
    candidates: list[tuple[int, float]]  # (row id, distance), best first
    truncated: bool = False

    def __post_init__(self):
        dists = [d for _, d in self.candidates]
        if any(b < a for a, b in zip(dists, dists[1:])):
            raise ContractViolation("candidate distances must be non-decreasing")


def _squared_distances(store: DescriptorStore, query: np.ndarray) -> np.ndarray:
    q = query.astype(np.float64)
    qq = float(q @ q)
    out = np.empty(len(store))
    for lo in range(0, len(store), SCAN_BLOCK_ROWS):
        block = store.matrix[lo : lo + SCAN_BLOCK_ROWS].astype(np.float64)
        d2 = qq + np.einsum("ij,ij->i", block, block) - 2.0 * (block @ q)
        out[lo : lo + len(block)] = d2
    return np.maximum(out, 0.0)


def knn(store: DescriptorStore, query_vec: np.ndarray, k: int,
        query_geo: tuple[float, float] = (0.0, 0.0)) -> RetrievalResult:
    """The k nearest rows; k > N returns all N flagged truncated."""
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    query = np.asarray(query_vec, dtype=np.float64).reshape(-1)
    if query.shape[0] != store.dim:
        raise ContractViolation(f"query dim {query.shape[0]} != store dim {store.dim}")
    norm = float(np.linalg.norm(query))
    if abs(norm - 1.0) > 1e-6:
        raise ContractViolation(f"query must be unit norm, got {norm:.8f}")

    d2 = _squared_distances(store, query)
    truncated = k > len(store)
    take = min(k, len(store))
    order = np.lexsort((np.arange(len(store)), d2))[:take]
    candidates = [(int(i), float(np.sqrt(d2[i]))) for i in order]
    return RetrievalResult(query_geo=query_geo, candidates=candidates, truncated=truncated)


def search_all(store: DescriptorStore, queries: np.ndarray, k: int,
               query_geos=None) -> list[RetrievalResult]:
    queries = np.asarray(queries, dtype=np.float64)
    if query_geos is None:
        query_geos = [(0.0, 0.0)] * len(queries)
    return [
        knn(store, q, k, query_geo=tuple(geo)) for q, geo in zip(queries, query_geos)
    ]
