"""Dataset manifests and pose tables.

A manifest is a small JSON file describing one image set: its role in the
pipeline, where the images live, and the pose table (CSV with a mandatory
header) that labels them. Paths are resolved relative to the manifest
file. Alignment manifests come in real/synt pairs joined 1:1 on the
pair-key column.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, InputError
from ..mesh_geometry.meshio import load_image_rgb

ROLES = ("alignment_real", "alignment_synt", "target_db", "queries")
_HEADING_REQUIRED_ROLES = ("alignment_real", "alignment_synt", "target_db")

POSE_COLUMNS = ("image_id", "lat", "lon", "heading_rad")
OPTIONAL_POSE_COLUMNS = ("pitch_rad", "roll_rad", "altitude_m")


@dataclass(frozen=True)
class PoseRecord:
    image_id: str
    lat: float
    lon: float
    heading: float | None = None  # yaw, radians
    pitch: float | None = None
    roll: float | None = None
    altitude: float | None = None

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise InputError(f"pose {self.image_id}: bad coordinates "
                             f"({self.lat}, {self.lon})")


def read_pose_csv(path) -> list[PoseRecord]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"cannot read pose table {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty pose table")
        missing = [c for c in POSE_COLUMNS[:3] if c not in reader.fieldnames]
        if missing:
            raise FormatError(f"{path}: pose table missing columns {missing}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            def opt(col):
                v = row.get(col)
                return float(v) if v not in (None, "") else None

            try:
                records.append(
                    PoseRecord(
                        image_id=row["image_id"],
                        lat=float(row["lat"]),
                        lon=float(row["lon"]),
                        heading=opt("heading_rad"),
                        pitch=opt("pitch_rad"),
                        roll=opt("roll_rad"),
                        altitude=opt("altitude_m"),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad pose row: {exc}") from exc
    return records


def write_pose_csv(records: list[PoseRecord], path) -> None:
    has_optional = any(
        r.pitch is not None or r.roll is not None or r.altitude is not None
        for r in records
    )
    columns = list(POSE_COLUMNS) + (list(OPTIONAL_POSE_COLUMNS) if has_optional else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in records:
            row = [
                r.image_id,
                repr(r.lat),
                repr(r.lon),
                "" if r.heading is None else repr(r.heading),
            ]
            if has_optional:
                for v in (r.pitch, r.roll, r.altitude):
                    row.append("" if v is None else repr(v))
            w.writerow(row)


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    role: str
    image_dir: Path
    pose_table: Path
    mesh_path: Path | None = None
    pair_key: str = "image_id"

    def records(self) -> list[PoseRecord]:
        records = read_pose_csv(self.pose_table)
        if self.role in _HEADING_REQUIRED_ROLES:
            for r in records:
                if r.heading is None:
                    raise InputError(
                        f"manifest {self.name}: record {r.image_id} lacks a heading, "
                        f"required for role {self.role}"
                    )
        return records

    def image_path(self, image_id: str) -> Path:
        return self.image_dir / f"{image_id}.png"


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad manifest JSON: {exc}") from exc
    for key in ("name", "role", "image_dir", "pose_table"):
        if key not in raw:
            raise FormatError(f"{path}: manifest missing field {key!r}")
    if raw["role"] not in ROLES:
        raise FormatError(f"{path}: unknown role {raw['role']!r} (expected {ROLES})")
    base = path.parent
    manifest = DatasetManifest(
        name=raw["name"],
        role=raw["role"],
        image_dir=(base / raw["image_dir"]).resolve(),
        pose_table=(base / raw["pose_table"]).resolve(),
        mesh_path=(base / raw["mesh_path"]).resolve() if raw.get("mesh_path") else None,
        pair_key=raw.get("pair_key", "image_id"),
    )
    if not manifest.image_dir.is_dir():
        raise InputError(f"{path}: image directory {manifest.image_dir} does not exist")
    if not manifest.pose_table.is_file():
        raise InputError(f"{path}: pose table {manifest.pose_table} does not exist")
    if manifest.mesh_path and not manifest.mesh_path.is_file():
        raise InputError(f"{path}: mesh {manifest.mesh_path} does not exist")
    # fail early on broken image references
    for rec in manifest.records():
        img = manifest.image_path(rec.image_id)
        if not img.is_file():
            raise InputError(f"{path}: image {img} referenced by pose table is missing")
    return manifest


def save_manifest(manifest_path, name, role, image_dir, pose_table,
                  mesh_path=None, pair_key="image_id") -> Path:
    manifest_path = Path(manifest_path)
    base = manifest_path.parent

    def rel(p):
        p = Path(p)
        try:
            return str(p.relative_to(base))
        except ValueError:
            return str(p)

    raw = {
        "name": name,
        "role": role,
        "image_dir": rel(image_dir),
        "pose_table": rel(pose_table),
        "pair_key": pair_key,
    }
    if mesh_path is not None:
        raw["mesh_path"] = rel(mesh_path)
    manifest_path.write_text(json.dumps(raw, indent=1, sort_keys=True))
    return manifest_path


def image_to_tensor(rgb: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 -> (3, H, W) float64 in [0, 1]."""
    return rgb.astype(np.float64).transpose(2, 0, 1) / 255.0


def load_image_tensors(manifest: DatasetManifest, records=None) -> np.ndarray:
    """All manifest images as one (N, 3, H, W) array, pose-table order."""
    if records is None:
        records = manifest.records()
    tensors = [image_to_tensor(load_image_rgb(manifest.image_path(r.image_id)))
               for r in records]
    if not tensors:
        return np.zeros((0, 3, 0, 0))
    return np.stack(tensors)


def load_alignment_pairs(real_manifest: DatasetManifest,
                         synt_manifest: DatasetManifest):
    """Join the two alignment manifests 1:1 on the pair key."""
    from ..alignment.train import PairedAlignmentSet

    if real_manifest.role != "alignment_real" or synt_manifest.role != "alignment_synt":
        raise InputError(
            f"expected roles alignment_real/alignment_synt, got "
            f"{real_manifest.role}/{synt_manifest.role}"
        )
    real_records = {r.image_id: r for r in real_manifest.records()}
    synt_records = {r.image_id: r for r in synt_manifest.records()}
    if len(real_records) != len(synt_records) or set(real_records) != set(synt_records):
        only_real = sorted(set(real_records) - set(synt_records))
        only_synt = sorted(set(synt_records) - set(real_records))
        missing = (only_real + only_synt)[:5]
        raise InputError(
            f"alignment pair join failed on key '{real_manifest.pair_key}': "
            f"unmatched ids {missing}"
        )
    ids = sorted(real_records)
    real = load_image_tensors(real_manifest, [real_records[i] for i in ids])
    synt = load_image_tensors(synt_manifest, [synt_records[i] for i in ids])
    return PairedAlignmentSet(real=real, synt=synt, pair_ids=ids)
