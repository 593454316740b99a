"""Descriptor database: L2-normalized rows plus pose metadata.

On disk and in memory the matrix is float32; distance math promotes to
float64. File layout: magic, version u32, N u64, D u32, row-major
little-endian float32, then one JSON line of metadata per row.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, InputError, UnsupportedVersion

STORE_MAGIC = b"MVPRDESC"
STORE_VERSION = 1
ROW_NORM_TOL = 1e-6

DOMAINS = ("real", "synthetic")


@dataclass(frozen=True)
class StoreRecord:
    image_id: str
    lat: float
    lon: float
    yaw: float
    domain: str  # "real" or "synthetic"

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise InputError(f"domain must be one of {DOMAINS}, got {self.domain!r}")


@dataclass
class DescriptorStore:
    matrix: np.ndarray  # (N, D) float32, unit rows
    records: list[StoreRecord]

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if self.matrix.ndim != 2:
            raise InputError("descriptor matrix must be 2-D")
        if len(self.records) != len(self.matrix):
            raise InputError(
                f"{len(self.records)} metadata rows for {len(self.matrix)} descriptors"
            )
        if len(self.matrix):
            norms = np.linalg.norm(self.matrix.astype(np.float64), axis=1)
            bad = np.nonzero(np.abs(norms - 1.0) > ROW_NORM_TOL)[0]
            if bad.size:
                raise InputError(
                    f"descriptor row {bad[0]} has norm {norms[bad[0]]:.8f}, expected 1"
                )

    def __len__(self) -> int:
        return len(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def geo(self, row: int) -> tuple[float, float]:
        rec = self.records[row]
        return rec.lat, rec.lon


def build_store(model, images: np.ndarray, records: list[StoreRecord | None],
                batch_size: int = 64, workers: int = 1) -> DescriptorStore:
    """Embed images in input order; parallel over batches, output stable."""
    from ..alignment.model import forward

    images = np.asarray(images, dtype=np.float64)
    if len(images) != len(records):
        raise InputError(f"{len(images)} images but {len(records)} metadata rows")
    for i, rec in enumerate(records):
        if rec is None:
            raise InputError(f"missing pose metadata for image index {i}")
    if len(images) == 0:
        return DescriptorStore(
            matrix=np.zeros((0, model.output_dim), dtype=np.float32), records=[]
        )

    starts = list(range(0, len(images), batch_size))

    def embed(start: int) -> np.ndarray:
        return forward(model, images[start : start + batch_size])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(embed, starts))
    else:
        chunks = [embed(s) for s in starts]
    matrix = np.concatenate(chunks, axis=0).astype(np.float32)
    return DescriptorStore(matrix=matrix, records=list(records))


def save_store(store: DescriptorStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<I", STORE_VERSION))
        fh.write(struct.pack("<Q", len(store)))
        fh.write(struct.pack("<I", store.dim))
        fh.write(store.matrix.astype("<f4").tobytes())
        for rec in store.records:
            line = json.dumps(
                {
                    "id": rec.image_id,
                    "lat": rec.lat,
                    "lon": rec.lon,
                    "yaw": rec.yaw,
                    "domain": rec.domain,
                },
                sort_keys=True,
            )
            fh.write(line.encode("utf-8") + b"\n")


def load_store(path) -> DescriptorStore:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read store {path}: {exc}") from exc
    try:
        if blob[:8] != STORE_MAGIC:
            raise FormatError(f"{path}: not a descriptor store")
        (version,) = struct.unpack_from("<I", blob, 8)
        if version != STORE_VERSION:
            raise UnsupportedVersion(f"{path}: store version {version} unsupported")
        (n,) = struct.unpack_from("<Q", blob, 12)
        (d,) = struct.unpack_from("<I", blob, 20)
        start = 24
        end = start + 4 * n * d
        if end > len(blob):
            raise FormatError(f"{path}: truncated descriptor block")
        matrix = np.frombuffer(blob[start:end], dtype="<f4").reshape(n, d).copy()
        lines = blob[end:].decode("utf-8").splitlines()
        if len(lines) != n:
            raise FormatError(f"{path}: {len(lines)} metadata lines for {n} rows")
        records = []
        for line in lines:
            raw = json.loads(line)
            records.append(
                StoreRecord(
                    image_id=str(raw["id"]),
                    lat=float(raw["lat"]),
                    lon=float(raw["lon"]),
                    yaw=float(raw["yaw"]),
                    domain=str(raw["domain"]),
                )
            )
    except (struct.error, ValueError, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt descriptor store: {exc}") from exc
    return DescriptorStore(matrix=matrix, records=records)
