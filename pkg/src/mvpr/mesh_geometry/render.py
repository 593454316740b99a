"""Deterministic software renderer: flat Lambert shading over face colors.

One primary ray per pixel through a pinhole camera; no shadows, no
textures. The output is a pure function of (mesh, pose, size, fov).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .core import TriangleMesh
from .poses import CameraPose
from .raycast import intersect_rays

SKY_RGB = (135, 206, 235)
LIGHT_DIR = np.array([0.3, 0.3, 0.9]) / np.linalg.norm([0.3, 0.3, 0.9])
DEFAULT_FACE_RGB = (180, 180, 180)


@dataclass(frozen=True)
class RenderedImage:
    width: int
    height: int
    pixels: bytes  # row-major RGB, 8-bit per channel
    pose: CameraPose
    fov: float  # horizontal, radians

    def __post_init__(self):
        if len(self.pixels) != 3 * self.width * self.height:
            raise InputError("pixel buffer size does not match dimensions")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)


def _pixel_directions(pose: CameraPose, width: int, height: int, fov: float) -> np.ndarray:
    forward, right, up = pose.basis()
    half_w = math.tan(fov / 2.0)
    half_h = half_w * height / width
    xs = (2.0 * (np.arange(width) + 0.5) / width - 1.0) * half_w
    ys = (2.0 * (np.arange(height) + 0.5) / height - 1.0) * half_h
    dirs = (
        forward[None, None, :]
        + xs[None, :, None] * right[None, None, :]
        - ys[:, None, None] * up[None, None, :]
    )
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    return dirs.reshape(-1, 3)


def render_view(
    mesh: TriangleMesh, pose: CameraPose, width: int, height: int, fov: float
) -> RenderedImage:
    if width < 1 or height < 1:
        raise InputError("image dimensions must be >= 1")
    if not (0.0 < fov < math.pi):
        raise InputError("horizontal fov must lie in (0, pi)")

    dirs = _pixel_directions(pose, width, height, fov)
    origins = np.broadcast_to(pose.position, dirs.shape)
    _, tri_id = intersect_rays(mesh, origins, dirs)

    out = np.empty((width * height, 3), dtype=np.float64)
    out[:] = SKY_RGB
    hit = tri_id >= 0
    if hit.any():
        tids = tri_id[hit]
        v0, v1, v2 = mesh.corner_arrays()
        normals = np.cross(v1[tids] - v0[tids], v2[tids] - v0[tids])
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        # orient toward the camera before shading
        facing = np.einsum("ij,ij->i", normals, dirs[hit])
        normals[facing > 0] *= -1.0
        lambert = np.maximum(0.0, normals @ LIGHT_DIR)
        if mesh.face_colors is not None:
            base = mesh.face_colors[tids].astype(np.float64)
        else:
            base = np.full((len(tids), 3), DEFAULT_FACE_RGB, dtype=np.float64)
        out[hit] = base * lambert[:, None]

    pixels = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return RenderedImage(
        width=width,
        height=height,
        pixels=pixels.tobytes(),
        pose=pose,
        fov=float(fov),
    )
