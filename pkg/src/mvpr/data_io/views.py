"""Rendering database images at planned viewpoints."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from ..errors import OutsideMeshFootprint
from ..mesh_geometry import (
    RenderedImage,
    TriangleMesh,
    estimate_ground,
    make_camera_pose,
    render_view,
    save_png,
)
from ..mesh_geometry.poses import DEFAULT_CAMERA_HEIGHT_M
from .manifest import PoseRecord, save_manifest, write_pose_csv

logger = logging.getLogger(__name__)

DEFAULT_VIEW_SIZE = 32
DEFAULT_FOV_RAD = 1.5707963267948966  # 90 degrees


def render_at_geo(
    mesh: TriangleMesh,
    lat: float,
    lon: float,
    heading: float,
    width: int = DEFAULT_VIEW_SIZE,
    height: int = DEFAULT_VIEW_SIZE,
    fov: float = DEFAULT_FOV_RAD,
    camera_height: float = DEFAULT_CAMERA_HEIGHT_M,
) -> RenderedImage:
    """Ground-trace at the geographic point, then render from car height.

    Raises OutsideMeshFootprint when the point has no ground below it.
    """
    projection = mesh.projection()
    x, y = projection.to_local(lat, lon)
    ground = estimate_ground(mesh, (x, y))
    pose = make_camera_pose(ground, heading, camera_height, geo=(lat, lon))
    return render_view(mesh, pose, width, height, fov)


@dataclass
class RenderedDatabase:
    records: list[PoseRecord]
    skipped: list[tuple[str, str]]  # (image id, reason)
    pose_table: Path
    manifest_path: Path


def render_database(
    mesh: TriangleMesh,
    viewpoints: list[dict],
    out_dir,
    *,
    width: int = DEFAULT_VIEW_SIZE,
    height: int = DEFAULT_VIEW_SIZE,
    fov: float = DEFAULT_FOV_RAD,
    camera_height: float = DEFAULT_CAMERA_HEIGHT_M,
    name: str = "synthetic_db",
    transform=None,
) -> RenderedDatabase:
    """Render one image per viewpoint row (dicts with lat/lon/heading_rad).

    Viewpoints outside the mesh footprint are skipped and listed in
    skipped.txt; everything else lands in images/ with a pose table and a
    target_db manifest.
    """
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    records: list[PoseRecord] = []
    skipped: list[tuple[str, str]] = []
    for row in viewpoints:
        image_id = f"view_{row['index']:05d}"
        try:
            image = render_at_geo(
                mesh, row["lat"], row["lon"], row["heading_rad"],
                width=width, height=height, fov=fov, camera_height=camera_height,
            )
        except OutsideMeshFootprint as exc:
            skipped.append((image_id, str(exc)))
            logger.warning("skipping %s: %s", image_id, exc)
            continue
        if transform is not None:
            image = transform(image)
        save_png(image, image_dir / f"{image_id}.png")
        records.append(
            PoseRecord(
                image_id=image_id,
                lat=row["lat"],
                lon=row["lon"],
                heading=row["heading_rad"],
                pitch=image.pose.pitch,
                roll=image.pose.roll,
                altitude=float(image.pose.position[2]),
            )
        )
    pose_table = out_dir / "poses.csv"
    write_pose_csv(records, pose_table)
    (out_dir / "skipped.txt").write_text(
        "".join(f"{image_id}\t{reason}\n" for image_id, reason in skipped)
    )
    manifest_path = save_manifest(
        out_dir / "manifest.json", name=name, role="target_db",
        image_dir=image_dir, pose_table=pose_table,
    )
    return RenderedDatabase(
        records=records, skipped=skipped, pose_table=pose_table,
        manifest_path=manifest_path,
    )
