"""Five-stage pipeline orchestration with content-addressed stage caching.

Stages: plan-route, render-db, align, build-index (three stores: aligned
student, unaligned teacher, and optionally a real-image reference), then
evaluate. Each stage records a hash of its inputs and outputs in
cache.json under the output directory; a stage reruns when inputs changed
or any output is missing or corrupt.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import TrainConfig, align, forward, load_checkpoint, save_checkpoint
from .capture_planner import (
    parse_osm,
    plan_route,
    sample_path,
    write_route_geojson,
    write_viewpoints_csv,
)
from .capture_planner.route import read_viewpoints_csv
from .data_io import load_alignment_pairs, load_image_tensors, load_manifest
from .errors import InputError
from .mesh_geometry import load_mesh
from .retrieval_eval import (
    StoreRecord,
    build_store,
    gap_report,
    load_store,
    recall_at_k,
    save_store,
    search_all,
    write_gap_report,
    write_recall_report,
)

logger = logging.getLogger(__name__)

ENV_PREFIX = "MVPR_"


@dataclass
class PipelineConfig:
    base_dir: Path
    seed: int
    osm_file: Path
    mesh: Path
    palette: Path | None
    spacing_m: float
    image: dict
    alignment: dict
    evaluation: dict
    out_dir: Path

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read pipeline config {path}: {exc}") from exc
        raw = apply_env_overrides(raw)
        base = path.parent
        for key in ("osm_file", "mesh", "spacing_m", "alignment", "evaluation"):
            if key not in raw:
                raise InputError(f"{path}: pipeline config missing {key!r}")

        def resolve(p):
            return (base / p).resolve() if p else None

        return cls(
            base_dir=base,
            seed=int(raw.get("seed", 0)),
            osm_file=resolve(raw["osm_file"]),
            mesh=resolve(raw["mesh"]),
            palette=resolve(raw.get("palette")),
            spacing_m=float(raw["spacing_m"]),
            image=dict(raw.get("image", {})),
            alignment=dict(raw["alignment"]),
            evaluation=dict(raw["evaluation"]),
            out_dir=resolve(raw.get("out_dir", "out")),
        )


def apply_env_overrides(raw: dict) -> dict:
    """Override top-level scalar config keys via MVPR_<KEY> variables."""
    out = dict(raw)
    for key in list(out):
        env = os.environ.get(ENV_PREFIX + key.upper())
        if env is None:
            continue
        try:
            out[key] = json.loads(env)
        except json.JSONDecodeError:
            out[key] = env
        logger.info("config %s overridden from environment", key)
    return out


def _hash_paths(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files = sorted(q for q in p.rglob("*") if q.is_file())
        else:
            files = [p]
        for f in files:
            h.update(str(f.name).encode())
            h.update(f.read_bytes() if f.is_file() else b"<missing>")
    return h.hexdigest()


def _hash_value(value) -> str:
    return hashlib.sha256(json.dumps(value, sort_keys=True).encode()).hexdigest()


class StageCache:
    def __init__(self, out_dir: Path):
        self.path = Path(out_dir) / "cache.json"
        self.data = {}
        if self.path.exists():
            try:
                self.data = json.loads(self.path.read_text())
            except json.JSONDecodeError:
                logger.warning("cache.json unreadable; ignoring cache")
                self.data = {}

    def fresh(self, stage: str, input_hash: str, outputs: list[Path]) -> bool:
        entry = self.data.get(stage)
        if not entry or entry.get("input_hash") != input_hash:
            return False
        for rel, digest in entry.get("outputs", {}).items():
            p = Path(rel)
            if not p.exists() or _hash_paths([p]) != digest:
                logger.info("stage %s: cached output %s missing or corrupt", stage, rel)
                return False
        return set(entry.get("outputs", {})) == {str(p) for p in outputs}

    def record(self, stage: str, input_hash: str, outputs: list[Path]) -> None:
        self.data[stage] = {
            "input_hash": input_hash,
            "outputs": {str(p): _hash_paths([p]) for p in outputs},
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=1, sort_keys=True))


def run_stage(cache: StageCache, stage: str, input_hash: str, outputs: list[Path],
              builder) -> bool:
    """Run builder unless the cache proves outputs are current. True if run."""
    if cache.fresh(stage, input_hash, outputs):
        logger.info("stage %s: cached", stage)
        return False
    logger.info("stage %s: running", stage)
    builder()
    for p in outputs:
        if not Path(p).exists():
            raise InputError(f"stage {stage} did not produce {p}")
    cache.record(stage, input_hash, outputs)
    return True


def _store_records(records, domain: str):
    return [
        StoreRecord(image_id=r.image_id, lat=r.lat, lon=r.lon,
                    yaw=0.0 if r.heading is None else r.heading, domain=domain)
        for r in records
    ]


def build_store_from_manifest(model, manifest, domain: str, workers: int = 1):
    records = manifest.records()
    images = load_image_tensors(manifest, records)
    return build_store(model, images, _store_records(records, domain), workers=workers)


def evaluate_store(store, query_manifest, query_model, ks, threshold_m):
    records = query_manifest.records()
    images = load_image_tensors(query_manifest, records)
    descriptors = forward(query_model, images)
    results = search_all(
        store, descriptors, max(ks), query_geos=[(r.lat, r.lon) for r in records]
    )
    return recall_at_k(results, store, ks=ks, threshold_m=threshold_m)


def run_all(config: PipelineConfig) -> dict:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cache = StageCache(out)
    image_cfg = {
        "width": int(config.image.get("width", 32)),
        "height": int(config.image.get("height", 32)),
        "fov_deg": float(config.image.get("fov_deg", 90.0)),
        "camera_height_m": float(config.image.get("camera_height_m", 2.5)),
    }

    # stage 1: route planning
    route_dir = out / "route"
    route_geojson = route_dir / "route.geojson"
    viewpoints_csv = route_dir / "viewpoints.csv"

    def build_route():
        route_dir.mkdir(parents=True, exist_ok=True)
        graph = parse_osm(config.osm_file.read_text())
        if not graph.edges:
            raise InputError("street graph is empty; nothing to plan")
        route = plan_route(graph)
        samples = sample_path(route, spacing=config.spacing_m)
        write_route_geojson(route, graph.projection, route_geojson)
        write_viewpoints_csv(samples, graph.projection, viewpoints_csv)

    run_stage(
        cache, "plan-route",
        _hash_paths([config.osm_file]) + _hash_value(config.spacing_m),
        [route_geojson, viewpoints_csv], build_route,
    )

    # stage 2: synthetic database rendering
    db_dir = out / "db_synt"
    db_manifest_path = db_dir / "manifest.json"

    def build_db():
        from .data_io.views import render_database

        mesh = load_mesh(config.mesh, palette_path=config.palette)
        viewpoints = read_viewpoints_csv(viewpoints_csv)
        render_database(
            mesh, viewpoints, db_dir,
            width=image_cfg["width"], height=image_cfg["height"],
            fov=np.deg2rad(image_cfg["fov_deg"]),
            camera_height=image_cfg["camera_height_m"],
        )

    mesh_inputs = [config.mesh] + ([config.palette] if config.palette else [])
    run_stage(
        cache, "render-db",
        _hash_paths(mesh_inputs + [viewpoints_csv]) + _hash_value(image_cfg),
        [db_manifest_path, db_dir / "poses.csv", db_dir / "images"], build_db,
    )

    # stage 3: feature alignment
    ckpt_dir = out / "checkpoints"
    student_ckpt = ckpt_dir / "student.ckpt"
    loss_csv = ckpt_dir / "alignment_loss.csv"
    real_manifest_path = (config.base_dir / config.alignment["real_manifest"]).resolve()
    synt_manifest_path = (config.base_dir / config.alignment["synt_manifest"]).resolve()
    init_ckpt = (config.base_dir / config.alignment["init_checkpoint"]).resolve()
    train_raw = dict(config.alignment.get("train", {}))
    train_raw.setdefault("rng_seed", config.seed)

    def build_alignment():
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        teacher = load_checkpoint(init_ckpt)
        student = teacher.copy()
        pairs = load_alignment_pairs(
            load_manifest(real_manifest_path), load_manifest(synt_manifest_path)
        )
        cfg = TrainConfig.from_dict(train_raw)
        trained, log = align(teacher, student, pairs, cfg)
        save_checkpoint(trained, student_ckpt)
        log.to_csv(loss_csv)

    run_stage(
        cache, "align",
        _hash_paths([real_manifest_path, synt_manifest_path, init_ckpt,
                     real_manifest_path.parent]) + _hash_value(train_raw),
        [student_ckpt, loss_csv], build_alignment,
    )

    # stage 4: descriptor stores
    stores_dir = out / "stores"
    aligned_store_path = stores_dir / "db_synt_aligned.store"
    teacher_store_path = stores_dir / "db_synt_teacher.store"
    real_db_manifest = config.evaluation.get("real_db_manifest")
    real_store_path = stores_dir / "db_real_teacher.store" if real_db_manifest else None

    def build_indexes():
        stores_dir.mkdir(parents=True, exist_ok=True)
        student = load_checkpoint(student_ckpt)
        teacher = load_checkpoint(init_ckpt)
        db_manifest = load_manifest(db_manifest_path)
        save_store(
            build_store_from_manifest(student, db_manifest, "synthetic"),
            aligned_store_path,
        )
        save_store(
            build_store_from_manifest(teacher, db_manifest, "synthetic"),
            teacher_store_path,
        )
        if real_store_path is not None:
            manifest = load_manifest((config.base_dir / real_db_manifest).resolve())
            save_store(
                build_store_from_manifest(teacher, manifest, "real"), real_store_path
            )

    index_outputs = [aligned_store_path, teacher_store_path]
    index_inputs = [student_ckpt, init_ckpt, db_dir]
    if real_store_path is not None:
        index_outputs.append(real_store_path)
        index_inputs.append((config.base_dir / real_db_manifest).resolve().parent)
    run_stage(cache, "build-index", _hash_paths(index_inputs), index_outputs,
              build_indexes)

    # stage 5: evaluation and reports
    reports_dir = out / "reports"
    ks = tuple(int(k) for k in config.evaluation.get("ks", (1, 5, 10, 20, 100)))
    threshold = float(config.evaluation.get("threshold_m", 25.0))
    queries_path = (config.base_dir / config.evaluation["queries_manifest"]).resolve()
    report_bases = {
        "aligned": reports_dir / "recall_aligned",
        "synt": reports_dir / "recall_synt",
    }
    if real_store_path is not None:
        report_bases["real"] = reports_dir / "recall_real"
    report_outputs = [b.with_suffix(ext) for b in report_bases.values()
                      for ext in (".md", ".csv", ".png")]
    if real_store_path is not None:
        report_outputs += [reports_dir / f"gap_report{ext}" for ext in
                           (".md", ".csv", ".png")]

    def build_reports():
        reports_dir.mkdir(parents=True, exist_ok=True)
        teacher = load_checkpoint(init_ckpt)
        queries = load_manifest(queries_path)
        tables = {}
        tables["aligned"] = evaluate_store(
            load_store(aligned_store_path), queries, teacher, ks, threshold
        )
        tables["synt"] = evaluate_store(
            load_store(teacher_store_path), queries, teacher, ks, threshold
        )
        write_recall_report(tables["aligned"], report_bases["aligned"],
                            title="Aligned student on synthetic DB")
        write_recall_report(tables["synt"], report_bases["synt"],
                            title="Unaligned teacher on synthetic DB")
        if real_store_path is not None:
            tables["real"] = evaluate_store(
                load_store(real_store_path), queries, teacher, ks, threshold
            )
            write_recall_report(tables["real"], report_bases["real"],
                                title="Teacher on real DB")
            report = gap_report(tables["real"], tables["synt"], tables["aligned"])
            write_gap_report(report, reports_dir / "gap_report")

    eval_inputs = [p for p in index_outputs] + [queries_path, queries_path.parent,
                                                init_ckpt]
    run_stage(
        cache, "evaluate",
        _hash_paths(eval_inputs) + _hash_value({"ks": list(ks), "threshold": threshold}),
        report_outputs, build_reports,
    )

    return {
        "route_geojson": route_geojson,
        "viewpoints_csv": viewpoints_csv,
        "db_manifest": db_manifest_path,
        "student_checkpoint": student_ckpt,
        "stores": index_outputs,
        "reports_dir": reports_dir,
    }
