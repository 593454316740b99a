from .knn import RetrievalResult, knn, search_all
from .metrics import (
    DEFAULT_KS,
    DEFAULT_THRESHOLD_M,
    GapReport,
    GapRow,
    RecallTable,
    gap_report,
    geodesic_distance,
    recall_at_k,
)
from .store import DescriptorStore, StoreRecord, build_store, load_store, save_store
from .report import write_gap_report, write_recall_report

__all__ = [
    "DEFAULT_KS",
    "DEFAULT_THRESHOLD_M",
    "DescriptorStore",
    "GapReport",
    "GapRow",
    "RecallTable",
    "RetrievalResult",
    "StoreRecord",
    "build_store",
    "gap_report",
    "geodesic_distance",
    "knn",
    "load_store",
    "recall_at_k",
    "save_store",
    "search_all",
    "write_gap_report",
    "write_recall_report",
]
