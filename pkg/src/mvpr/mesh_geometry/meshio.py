"""Mesh and image file formats.

Meshes: an ASCII OBJ subset (v/f, 1-based indices, usemtl mapped to face
colors through a sidecar JSON palette) and binary little-endian PLY
(float32 vertex x,y,z; uchar-counted int vertex_indices per face, optional
uchar face RGB). Both carry the geographic anchor in a comment line.

Images: PPM (P6) and PNG.
"""

from __future__ import annotations

import json
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import FormatError, UnsupportedVersion
from .core import TriangleMesh
from .render import RenderedImage

_ANCHOR_RE = re.compile(r"geo_anchor\s+(-?[\d.eE+-]+)\s+(-?[\d.eE+-]+)")


def load_palette(path) -> dict[str, tuple[int, int, int]]:
    """Sidecar palette: JSON object mapping material name -> [r, g, b]."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read palette {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError(f"palette {path} must be a JSON object")
    palette = {}
    for name, rgb in raw.items():
        if not (isinstance(rgb, list) and len(rgb) == 3):
            raise FormatError(f"palette entry {name!r} must be [r, g, b]")
        palette[name] = tuple(int(c) for c in rgb)
    return palette


def save_palette(palette: dict[str, tuple[int, int, int]], path) -> None:
    Path(path).write_text(
        json.dumps({k: list(v) for k, v in palette.items()}, indent=1, sort_keys=True)
    )


def load_obj(path, palette: dict | None = None) -> TriangleMesh:
    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    colors: list[tuple[int, int, int]] = []
    current_color = None
    anchor = None
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if line.startswith("#"):
            m = _ANCHOR_RE.search(line)
            if m:
                anchor = (float(m.group(1)), float(m.group(2)))
            continue
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise FormatError(f"{path}:{lineno}: vertex needs 3 coordinates")
            vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
        elif tag == "usemtl":
            name = parts[1] if len(parts) > 1 else ""
            if palette is not None:
                if name not in palette:
                    raise FormatError(f"{path}:{lineno}: material {name!r} not in palette")
                current_color = palette[name]
        elif tag == "f":
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                i = int(head)
                if i < 1 or i > len(vertices):
                    raise FormatError(f"{path}:{lineno}: face index {i} out of range")
                idx.append(i - 1)
            if len(idx) < 3:
                raise FormatError(f"{path}:{lineno}: face needs >= 3 vertices")
            for k in range(1, len(idx) - 1):  # fan triangulation
                triangles.append((idx[0], idx[k], idx[k + 1]))
                colors.append(current_color if current_color else (0, 0, 0))
        # other directives (vn, vt, o, g, s, mtllib) are ignored
    face_colors = None
    if palette is not None and triangles:
        face_colors = np.array(colors, dtype=np.uint8)
    return TriangleMesh(
        vertices=np.array(vertices, dtype=np.float64).reshape(-1, 3),
        triangles=np.array(triangles, dtype=np.int64).reshape(-1, 3),
        face_colors=face_colors,
        geo_anchor=anchor,
    )


def save_obj(mesh: TriangleMesh, path, palette_path=None) -> None:
    """Write the OBJ; when the mesh has face colors, also write the palette.

    Colors become synthetic materials named color_rrggbb so that
    load_obj(path, load_palette(palette_path)) reproduces the mesh.
    """
    lines = []
    if mesh.geo_anchor is not None:
        lines.append(f"# geo_anchor {mesh.geo_anchor[0]!r} {mesh.geo_anchor[1]!r}")
    for v in mesh.vertices:
        lines.append(f"v {v[0]!r} {v[1]!r} {v[2]!r}")
    palette = {}
    if mesh.face_colors is None:
        for tri in mesh.triangles:
            lines.append(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}")
    else:
        last = None
        for tri, rgb in zip(mesh.triangles, mesh.face_colors):
            name = f"color_{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"
            palette[name] = (int(rgb[0]), int(rgb[1]), int(rgb[2]))
            if name != last:
                lines.append(f"usemtl {name}")
                last = name
            lines.append(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n")
    if palette_path is not None and palette:
        save_palette(palette, palette_path)


def save_ply(mesh: TriangleMesh, path) -> None:
    has_colors = mesh.face_colors is not None
    header = ["ply", "format binary_little_endian 1.0"]
    if mesh.geo_anchor is not None:
        header.append(f"comment geo_anchor {mesh.geo_anchor[0]!r} {mesh.geo_anchor[1]!r}")
    header += [
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
        f"element face {len(mesh.triangles)}",
        "property list uchar int vertex_indices",
    ]
    if has_colors:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(mesh.vertices.astype("<f4").tobytes())
        for i, tri in enumerate(mesh.triangles):
            fh.write(struct.pack("<B3i", 3, int(tri[0]), int(tri[1]), int(tri[2])))
            if has_colors:
                fh.write(struct.pack("<3B", *mesh.face_colors[i]))


def load_ply(path) -> TriangleMesh:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply") or end < 0:
        raise FormatError(f"{path}: not a PLY file")
    header = blob[:end].decode("ascii", errors="replace").splitlines()
    body = memoryview(blob)[end + len(b"end_header\n") :]

    anchor = None
    n_vertex = n_face = 0
    vertex_props: list[str] = []
    face_color = False
    element = None
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise UnsupportedVersion(f"{path}: only binary_little_endian is supported")
        elif parts[0] == "comment":
            m = _ANCHOR_RE.search(line)
            if m:
                anchor = (float(m.group(1)), float(m.group(2)))
        elif parts[0] == "element":
            element = parts[1]
            if element == "vertex":
                n_vertex = int(parts[2])
            elif element == "face":
                n_face = int(parts[2])
            else:
                raise FormatError(f"{path}: unsupported element {element!r}")
        elif parts[0] == "property":
            if element == "vertex":
                if parts[1] not in ("float", "float32"):
                    raise UnsupportedVersion(f"{path}: vertex properties must be float32")
                vertex_props.append(parts[-1])
            elif element == "face" and parts[1] == "uchar":
                face_color = True
    if vertex_props[:3] != ["x", "y", "z"]:
        raise FormatError(f"{path}: vertex element must start with x, y, z")

    try:
        stride = 4 * len(vertex_props)
        vdata = np.frombuffer(body[: n_vertex * stride], dtype="<f4").reshape(
            n_vertex, len(vertex_props)
        )
        vertices = vdata[:, :3].astype(np.float64)
        offset = n_vertex * stride
        triangles = np.empty((n_face, 3), dtype=np.int64)
        colors = np.empty((n_face, 3), dtype=np.uint8) if face_color else None
        for i in range(n_face):
            (count,) = struct.unpack_from("<B", body, offset)
            offset += 1
            if count != 3:
                raise FormatError(f"{path}: face {i} has {count} vertices, expected 3")
            triangles[i] = struct.unpack_from("<3i", body, offset)
            offset += 12
            if face_color:
                colors[i] = struct.unpack_from("<3B", body, offset)
                offset += 3
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated or corrupt PLY body: {exc}") from exc
    return TriangleMesh(vertices, triangles, face_colors=colors, geo_anchor=anchor)


def load_mesh(path, palette_path=None) -> TriangleMesh:
    """Dispatch on extension: .obj (with optional palette) or .ply."""
    p = Path(path)
    if p.suffix.lower() == ".ply":
        return load_ply(p)
    palette = None
    if palette_path is not None:
        palette = load_palette(palette_path)
    else:
        sidecar = p.with_suffix(".palette.json")
        if sidecar.exists():
            palette = load_palette(sidecar)
    return load_obj(p, palette=palette)


def save_ppm(image: RenderedImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P6\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(image.pixels)


def save_png(image: RenderedImage, path) -> None:
    Image.frombytes("RGB", (image.width, image.height), image.pixels).save(path, format="PNG")


def load_image_rgb(path) -> np.ndarray:
    """Load a PNG/PPM image as (H, W, 3) uint8."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise FormatError(f"cannot read image {path}: {exc}") from exc
