"""Command-line interface.

Exit codes: 0 success, 2 usage or input error, 3 runtime failure. Errors
go to stderr prefixed with the failing stage; data goes to files (and
stdout only with --json).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ContractViolation,
    InputError,
    MvprError,
    TrainingDiverged,
    TransportError,
)

logger = logging.getLogger("mvpr")


def cmd_plan_route(args) -> int:
    from .capture_planner import (
        fetch_osm,
        parse_osm,
        plan_route,
        sample_path,
        write_route_geojson,
        write_viewpoints_csv,
    )

    if args.osm:
        text = Path(args.osm).read_text()
    else:
        if not args.bbox or not args.endpoint:
            raise InputError("either --osm FILE or both --bbox and --endpoint required")
        bbox = tuple(float(v) for v in args.bbox.split(","))
        if len(bbox) != 4:
            raise InputError("--bbox must be south,west,north,east")
        text = fetch_osm(bbox, args.endpoint)
    graph = parse_osm(text)
    if not graph.edges:
        raise InputError("street graph is empty; nothing to plan")
    route = plan_route(graph)
    samples = sample_path(route, spacing=args.spacing)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_route_geojson(route, graph.projection, out / "route.geojson")
    write_viewpoints_csv(samples, graph.projection, out / "viewpoints.csv")
    logger.info(
        "route: %.1f m over %d steps (%s matching), %d viewpoints",
        route.total_length, len(route.steps),
        {True: "exact", False: "heuristic", None: "no"}[route.matching_exact],
        len(samples),
    )
    return 0


def cmd_render_db(args) -> int:
    from .capture_planner.route import read_viewpoints_csv
    from .data_io.views import render_database
    from .mesh_geometry import load_mesh

    mesh = load_mesh(args.mesh, palette_path=args.palette)
    viewpoints = read_viewpoints_csv(args.viewpoints)
    result = render_database(
        mesh, viewpoints, args.out,
        width=args.width, height=args.height, fov=np.deg2rad(args.fov_deg),
        camera_height=args.camera_height,
    )
    logger.info(
        "rendered %d images, skipped %d (see skipped.txt)",
        len(result.records), len(result.skipped),
    )
    return 0


def cmd_align(args) -> int:
    from .alignment import TrainConfig, align, load_checkpoint, save_checkpoint
    from .data_io import load_alignment_pairs, load_manifest

    teacher = load_checkpoint(args.init)
    pairs = load_alignment_pairs(load_manifest(args.real), load_manifest(args.synt))
    raw = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
    cfg = TrainConfig.from_dict(raw)
    trained, log = align(teacher, teacher.copy(), pairs, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(trained, out)
    log.to_csv(out.with_suffix(".loss.csv"))
    logger.info(
        "aligned on %d pairs: holdout loss %.3g -> %.3g",
        len(pairs), log.holdout_initial, log.holdout_final,
    )
    return 0


def cmd_build_index(args) -> int:
    from .alignment import load_checkpoint
    from .data_io import load_manifest
    from .pipeline import build_store_from_manifest
    from .retrieval_eval import save_store

    model = load_checkpoint(args.model)
    manifest = load_manifest(args.images)
    store = build_store_from_manifest(model, manifest, args.domain, workers=args.workers)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_store(store, args.out)
    logger.info("indexed %d descriptors of dim %d", len(store), store.dim)
    return 0


def cmd_evaluate(args) -> int:
    from .alignment import load_checkpoint
    from .data_io import load_manifest
    from .pipeline import evaluate_store
    from .retrieval_eval import gap_report, load_store, write_gap_report, write_recall_report

    ks = tuple(int(k) for k in args.ks.split(","))
    store = load_store(args.db)
    queries = load_manifest(args.queries)
    model = load_checkpoint(args.query_model)
    table = evaluate_store(store, queries, model, ks, args.threshold_m)
    report_dir = Path(args.report)
    written = write_recall_report(table, report_dir / "recall", title="Recall")
    payload = {
        "recall": table.rounded(),
        "query_count": table.query_count,
        "threshold_m": table.threshold_m,
    }
    if args.compare:
        ref_table = evaluate_store(load_store(args.compare), queries, model, ks,
                                   args.threshold_m)
        report = gap_report(ref_table, table)
        written += write_gap_report(report, report_dir / "gap_report")
        payload["gap_vs_compare"] = {r.k: round(r.gap, 1) for r in report.rows}
    if args.json:
        json.dump(payload, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")
    logger.info("wrote %s", ", ".join(str(p) for p in written))
    return 0


def cmd_run_all(args) -> int:
    from .pipeline import PipelineConfig, run_all

    config = PipelineConfig.load(args.config)
    if args.out:
        config.out_dir = Path(args.out).resolve()
    artifacts = run_all(config)
    logger.info("pipeline complete; reports in %s", artifacts["reports_dir"])
    return 0


def cmd_make_toy_city(args) -> int:
    from .data_io import ToyCityConfig, generate_toy_city

    cfg = ToyCityConfig(seed=args.seed, blocks=args.blocks, spacing_m=args.spacing)
    city = generate_toy_city(args.out, cfg)
    logger.info(
        "toy city in %s: %d database viewpoints, %d queries",
        city.root, city.viewpoint_count, city.query_count,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mvpr",
        description="Mesh-based visual place recognition pipeline",
    )
    p.add_argument("--version", action="version", version=f"mvpr {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan-route", help="street graph -> capture route + viewpoints")
    sp.add_argument("--osm", help="offline OSM XML/JSON file")
    sp.add_argument("--bbox", help="south,west,north,east (with --endpoint)")
    sp.add_argument("--endpoint", help="Overpass API URL")
    sp.add_argument("--spacing", type=float, default=10.0, help="sample spacing meters")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plan_route)

    sp = sub.add_parser("render-db", help="render one image per viewpoint")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--palette", help="sidecar palette JSON (default: <mesh>.palette.json)")
    sp.add_argument("--viewpoints", required=True, help="viewpoint CSV from plan-route")
    sp.add_argument("--out", required=True)
    sp.add_argument("--width", type=int, default=32)
    sp.add_argument("--height", type=int, default=32)
    sp.add_argument("--fov-deg", type=float, default=90.0)
    sp.add_argument("--camera-height", type=float, default=2.5)
    sp.set_defaults(func=cmd_render_db)

    sp = sub.add_parser("align", help="fine-tune the synthetic-domain model")
    sp.add_argument("--real", required=True, help="alignment_real manifest")
    sp.add_argument("--synt", required=True, help="alignment_synt manifest")
    sp.add_argument("--init", required=True, help="initial checkpoint (teacher)")
    sp.add_argument("--config", help="training config JSON")
    sp.add_argument("--out", required=True, help="trained student checkpoint")
    sp.set_defaults(func=cmd_align)

    sp = sub.add_parser("build-index", help="embed a manifest into a descriptor store")
    sp.add_argument("--model", required=True)
    sp.add_argument("--images", required=True, help="manifest of images to embed")
    sp.add_argument("--out", required=True)
    sp.add_argument("--domain", choices=("real", "synthetic"), default="synthetic")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_build_index)

    sp = sub.add_parser("evaluate", help="Recall@K of queries against a store")
    sp.add_argument("--db", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--query-model", required=True)
    sp.add_argument("--ks", default="1,5,10,20,100")
    sp.add_argument("--threshold-m", type=float, default=25.0)
    sp.add_argument("--report", required=True)
    sp.add_argument("--compare", help="reference store for a gap report")
    sp.add_argument("--json", action="store_true", help="print results to stdout")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("run-all", help="run the full pipeline from a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", help="override the config's output directory")
    sp.set_defaults(func=cmd_run_all)

    sp = sub.add_parser("make-toy-city", help="generate the offline toy fixture")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--blocks", type=int, default=2)
    sp.add_argument("--spacing", type=float, default=10.0)
    sp.set_defaults(func=cmd_make_toy_city)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, ContractViolation, FileNotFoundError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    except (TransportError, TrainingDiverged) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 3
    except MvprError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
