"""Seeded toy-city generator.

Builds a small self-contained world for offline runs: a colored block
mesh, a street grid in OSM XML, paired two-domain alignment images, a
real-domain query set, and a pipeline config. The "real" domain is the
rendered image pushed through a fixed invertible channel-mixing matrix,
standing in for the photographic domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..alignment.model import EmbeddingModel, conv_embedding_architecture, save_checkpoint
from ..capture_planner import parse_osm, plan_route, sample_path
from ..geo import LocalProjection
from ..mesh_geometry import RenderedImage, TriangleMesh, save_obj, save_png
from .manifest import PoseRecord, save_manifest, write_pose_csv
from .views import render_at_geo

# rows are convex combinations, so [0,1] pixel values stay in range;
# the matrix is invertible (circulant, det != 0)
DOMAIN_MIX = np.array(
    [
        [0.55, 0.40, 0.05],
        [0.05, 0.55, 0.40],
        [0.40, 0.05, 0.55],
    ]
)


def shift_domain_tensor(images: np.ndarray) -> np.ndarray:
    """Apply the domain mix to (..., 3, H, W) float tensors."""
    return np.einsum("ck,...khw->...chw", DOMAIN_MIX, images)


def shift_domain_image(image: RenderedImage) -> RenderedImage:
    rgb = image.as_array().astype(np.float64)
    mixed = np.einsum("ck,hwk->hwc", DOMAIN_MIX, rgb)
    pixels = np.clip(np.rint(mixed), 0, 255).astype(np.uint8)
    return RenderedImage(
        width=image.width, height=image.height, pixels=pixels.tobytes(),
        pose=image.pose, fov=image.fov,
    )


@dataclass(frozen=True)
class ToyCityConfig:
    seed: int = 0
    blocks: int = 2  # blocks per side; (blocks+1)^2 intersections
    block_size_m: float = 60.0
    image_size: int = 32
    fov_deg: float = 90.0
    spacing_m: float = 10.0
    camera_height_m: float = 2.5
    anchor: tuple[float, float] = (37.75, -122.45)
    embed_dim: int = 32
    channels: tuple[int, ...] = (4, 8, 16)
    train_iterations: int = 1500
    train_batch_size: int = 16
    train_learning_rate: float = 1e-3


@dataclass
class ToyCity:
    root: Path
    mesh_path: Path
    palette_path: Path
    osm_path: Path
    align_real_manifest: Path
    align_synt_manifest: Path
    db_real_manifest: Path
    queries_manifest: Path
    teacher_checkpoint: Path
    config_path: Path
    viewpoint_count: int
    query_count: int


def _box(x0, y0, x1, y1, z0, z1, wall_rgb, roof_rgb):
    v = [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]
    quads = [
        (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7),  # walls
        (4, 5, 6, 7),  # roof
    ]
    tris, colors = [], []
    for qi, (a, b, c, d) in enumerate(quads):
        rgb = roof_rgb if qi == 4 else wall_rgb
        tris += [(a, b, c), (a, c, d)]
        colors += [rgb, rgb]
    return v, tris, colors


def build_toy_mesh(cfg: ToyCityConfig) -> TriangleMesh:
    rng = np.random.default_rng(cfg.seed)
    extent = cfg.blocks * cfg.block_size_m
    margin = 40.0
    vertices: list[tuple] = []
    triangles: list[tuple] = []
    colors: list[tuple] = []

    def add(verts, tris, cols):
        base = len(vertices)
        vertices.extend(verts)
        triangles.extend((a + base, b + base, c + base) for a, b, c in tris)
        colors.extend(cols)

    ground = [
        (-margin, -margin, 0.0),
        (extent + margin, -margin, 0.0),
        (extent + margin, extent + margin, 0.0),
        (-margin, extent + margin, 0.0),
    ]
    add(ground, [(0, 1, 2), (0, 2, 3)], [(90, 140, 90)] * 2)

    inset = 10.0
    for bi in range(cfg.blocks):
        for bj in range(cfg.blocks):
            cx0 = bi * cfg.block_size_m + inset
            cy0 = bj * cfg.block_size_m + inset
            usable = cfg.block_size_m - 2 * inset
            for _ in range(int(rng.integers(2, 4))):
                w = float(rng.uniform(10.0, 0.55 * usable))
                d = float(rng.uniform(10.0, 0.55 * usable))
                x0 = cx0 + float(rng.uniform(0.0, usable - w))
                y0 = cy0 + float(rng.uniform(0.0, usable - d))
                h = float(rng.uniform(8.0, 22.0))
                rgb = tuple(int(c) for c in rng.integers(60, 256, size=3))
                roof = tuple(int(c * 0.8) for c in rgb)
                add(*_box(x0, y0, x0 + w, y0 + d, 0.0, h, rgb, roof))
    return TriangleMesh(
        vertices=np.array(vertices),
        triangles=np.array(triangles),
        face_colors=np.array(colors, dtype=np.uint8),
        geo_anchor=cfg.anchor,
    )


def build_toy_osm_xml(cfg: ToyCityConfig) -> str:
    projection = LocalProjection(*cfg.anchor)
    n = cfg.blocks + 1

    def node_id(i, j):
        return i * n + j + 1

    lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6">']
    for i in range(n):
        for j in range(n):
            lat, lon = projection.to_geo(i * cfg.block_size_m, j * cfg.block_size_m)
            lines.append(f'  <node id="{node_id(i, j)}" lat="{lat!r}" lon="{lon!r}"/>')
    way_id = 1000
    for j in range(n):  # west-east streets
        refs = "".join(f'<nd ref="{node_id(i, j)}"/>' for i in range(n))
        lines.append(f'  <way id="{way_id}">{refs}<tag k="highway" v="residential"/></way>')
        way_id += 1
    for i in range(n):  # south-north streets
        refs = "".join(f'<nd ref="{node_id(i, j)}"/>' for j in range(n))
        lines.append(f'  <way id="{way_id}">{refs}<tag k="highway" v="residential"/></way>')
        way_id += 1
    lines.append("</osm>")
    return "\n".join(lines)


def _render_set(mesh, samples, projection, out_dir, prefix, cfg, domains=("synt",)):
    """Render each sample once; save per requested domain. Returns records."""
    out = {d: [] for d in domains}
    dirs = {}
    for d in domains:
        dirs[d] = Path(out_dir) / f"{prefix}_{d}" / "images"
        dirs[d].mkdir(parents=True, exist_ok=True)
    for idx, s in enumerate(samples):
        lat, lon = projection.to_geo(*s.xy)
        image_id = f"{prefix}_{idx:05d}"
        image = render_at_geo(
            mesh, lat, lon, s.heading,
            width=cfg.image_size, height=cfg.image_size,
            fov=np.deg2rad(cfg.fov_deg), camera_height=cfg.camera_height_m,
        )
        variants = {"synt": image}
        if "real" in domains:
            variants["real"] = shift_domain_image(image)
        for d in domains:
            save_png(variants[d], dirs[d] / f"{image_id}.png")
            out[d].append(
                PoseRecord(
                    image_id=image_id, lat=lat, lon=lon, heading=s.heading,
                    pitch=image.pose.pitch, roll=image.pose.roll,
                    altitude=float(image.pose.position[2]),
                )
            )
    return out, dirs


def generate_toy_city(out_dir, cfg: ToyCityConfig = ToyCityConfig()) -> ToyCity:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    osm_text = build_toy_osm_xml(cfg)
    osm_path = root / "streets.osm.xml"
    osm_path.write_text(osm_text)

    mesh = build_toy_mesh(cfg)
    mesh_path = root / "mesh.obj"
    palette_path = root / "mesh.palette.json"
    save_obj(mesh, mesh_path, palette_path=palette_path)

    graph = parse_osm(osm_text)
    route = plan_route(graph)
    db_samples = sample_path(route, spacing=cfg.spacing_m)
    # queries sit halfway between database viewpoints
    query_samples = sample_path(route, spacing=cfg.spacing_m / 2.0)[1::2]

    align_records, align_dirs = _render_set(
        mesh, db_samples, graph.projection, root, "align", cfg, domains=("synt", "real")
    )
    manifests = {}
    for d in ("synt", "real"):
        pose_table = root / f"align_{d}" / "poses.csv"
        write_pose_csv(align_records[d], pose_table)
        manifests[d] = save_manifest(
            root / f"align_{d}.json", name=f"toy_align_{d}", role=f"alignment_{d}",
            image_dir=align_dirs[d], pose_table=pose_table,
        )
    # the real-domain alignment images double as the real-DB reference
    db_real_manifest = save_manifest(
        root / "db_real.json", name="toy_db_real", role="target_db",
        image_dir=align_dirs["real"], pose_table=root / "align_real" / "poses.csv",
    )

    query_records, query_dirs = _render_set(
        mesh, query_samples, graph.projection, root, "queries", cfg, domains=("real",)
    )
    query_pose_table = root / "queries_real" / "poses.csv"
    write_pose_csv(query_records["real"], query_pose_table)
    queries_manifest = save_manifest(
        root / "queries.json", name="toy_queries", role="queries",
        image_dir=query_dirs["real"], pose_table=query_pose_table,
    )

    teacher = EmbeddingModel.initialized(
        conv_embedding_architecture(
            input_shape=(3, cfg.image_size, cfg.image_size),
            embed_dim=cfg.embed_dim, channels=cfg.channels,
        ),
        seed=cfg.seed,
    )
    teacher_checkpoint = root / "teacher_init.ckpt"
    save_checkpoint(teacher, teacher_checkpoint)

    config = {
        "seed": cfg.seed,
        "osm_file": "streets.osm.xml",
        "mesh": "mesh.obj",
        "palette": "mesh.palette.json",
        "spacing_m": cfg.spacing_m,
        "image": {
            "width": cfg.image_size,
            "height": cfg.image_size,
            "fov_deg": cfg.fov_deg,
            "camera_height_m": cfg.camera_height_m,
        },
        "alignment": {
            "real_manifest": "align_real.json",
            "synt_manifest": "align_synt.json",
            "init_checkpoint": "teacher_init.ckpt",
            "train": {
                "iterations": cfg.train_iterations,
                "batch_size": cfg.train_batch_size,
                "learning_rate": cfg.train_learning_rate,
                "rng_seed": cfg.seed,
            },
        },
        "evaluation": {
            "queries_manifest": "queries.json",
            "real_db_manifest": "db_real.json",
            "ks": [1, 5, 10, 20, 100],
            "threshold_m": 25.0,
        },
        "out_dir": "out",
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=1, sort_keys=True))

    return ToyCity(
        root=root,
        mesh_path=mesh_path,
        palette_path=palette_path,
        osm_path=osm_path,
        align_real_manifest=manifests["real"],
        align_synt_manifest=manifests["synt"],
        db_real_manifest=db_real_manifest,
        queries_manifest=queries_manifest,
        teacher_checkpoint=teacher_checkpoint,
        config_path=config_path,
        viewpoint_count=len(db_samples),
        query_count=len(query_samples),
    )
