"""Recall@K against a geodesic positive threshold, and gap reporting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ContractViolation, InputError
from ..geo import METERS_PER_DEG_LAT, METERS_PER_DEG_LON, _check_latlon
from .knn import RetrievalResult
from .store import DescriptorStore

DEFAULT_KS = (1, 5, 10, 20, 100)
DEFAULT_THRESHOLD_M = 25.0


def geodesic_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Equirectangular meters between two (lat, lon) points."""
    _check_latlon(*a)
    _check_latlon(*b)
    mean_lat = math.radians((a[0] + b[0]) / 2.0)
    dx = (b[1] - a[1]) * math.cos(mean_lat) * METERS_PER_DEG_LON
    dy = (b[0] - a[0]) * METERS_PER_DEG_LAT
    return math.hypot(dx, dy)


@dataclass(frozen=True)
class RecallTable:
    recall: dict[int, float]  # K -> percentage, unrounded
    query_count: int
    threshold_m: float

    @property
    def ks(self) -> list[int]:
        return sorted(self.recall)

    def rounded(self) -> dict[int, float]:
        return {k: round(v, 1) for k, v in self.recall.items()}


def recall_at_k(
    results: list[RetrievalResult],
    store: DescriptorStore,
    ks=DEFAULT_KS,
    threshold_m: float = DEFAULT_THRESHOLD_M,
) -> RecallTable:
    """A query is correct at K if any top-K candidate lies within the
    threshold of its true position."""
    if not results:
        raise InputError("recall over an empty query set is undefined")
    ks = sorted(set(int(k) for k in ks))
    if ks[0] < 1:
        raise InputError("every K must be >= 1")
    max_k = ks[-1]
    for i, res in enumerate(results):
        if len(res.candidates) < min(max_k, len(store)) and not res.truncated:
            raise ContractViolation(
                f"result {i} holds {len(res.candidates)} candidates, needs {max_k}"
            )
    correct = {k: 0 for k in ks}
    for res in results:
        hit_rank = None
        for rank, (row, _) in enumerate(res.candidates[:max_k]):
            if geodesic_distance(res.query_geo, store.geo(row)) <= threshold_m:
                hit_rank = rank
                break
        if hit_rank is None:
            continue
        for k in ks:
            if hit_rank < k:
                correct[k] += 1
    n = len(results)
    return RecallTable(
        recall={k: 100.0 * correct[k] / n for k in ks},
        query_count=n,
        threshold_m=threshold_m,
    )


@dataclass(frozen=True)
class GapRow:
    k: int
    real: float
    synt: float
    gap: float  # real - synt, percentage points
    aligned: float | None = None
    recovered_pct: float | None = None  # (aligned - synt) / (real - synt) * 100


@dataclass(frozen=True)
class GapReport:
    rows: tuple[GapRow, ...]
    query_count: int
    threshold_m: float


def gap_report(
    real_table: RecallTable,
    synt_table: RecallTable,
    aligned_table: RecallTable | None = None,
) -> GapReport:
    """Side-by-side real-vs-synthetic recall with per-K gap.

    With an aligned table, also reports how much of the gap the aligned
    model recovers.
    """
    tables = [real_table, synt_table] + ([aligned_table] if aligned_table else [])
    counts = {t.query_count for t in tables}
    if len(counts) != 1:
        raise ContractViolation(f"mismatched query counts: {sorted(counts)}")
    keys = {tuple(t.ks) for t in tables}
    if len(keys) != 1:
        raise ContractViolation("tables cover different K values")

    rows = []
    for k in real_table.ks:
        real, synt = real_table.recall[k], synt_table.recall[k]
        gap = real - synt
        aligned = recovered = None
        if aligned_table is not None:
            aligned = aligned_table.recall[k]
            if abs(gap) > 1e-12:
                recovered = 100.0 * (aligned - synt) / gap
        rows.append(
            GapRow(k=k, real=real, synt=synt, gap=gap, aligned=aligned,
                   recovered_pct=recovered)
        )
    return GapReport(
        rows=tuple(rows),
        query_count=real_table.query_count,
        threshold_m=real_table.threshold_m,
    )
