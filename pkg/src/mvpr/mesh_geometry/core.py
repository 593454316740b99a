"""Triangle mesh and ray primitives.

Coordinates are meters in a local ENU frame (x east, y north, z up),
optionally anchored to geographic coordinates via ``geo_anchor``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..geo import LocalProjection, _check_latlon

MIN_TRIANGLE_AREA = 1e-12


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray  # unit length

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        n = float(np.linalg.norm(d))
        if abs(n - 1.0) > 1e-9:
            raise InputError(f"ray direction must be unit length, got norm {n}")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class RayHit:
    t: float
    point: np.ndarray
    normal: np.ndarray  # unit, oriented against the ray direction
    triangle_id: int


class TriangleMesh:
    """Indexed triangle soup with optional per-face color.

    vertices: (V, 3) float64, triangles: (T, 3) int indices,
    face_colors: optional (T, 3) uint8 RGB.
    """

    def __init__(self, vertices, triangles, face_colors=None, geo_anchor=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        if face_colors is None:
            self.face_colors = None
        else:
            self.face_colors = np.ascontiguousarray(face_colors, dtype=np.uint8).reshape(-1, 3)
        self.geo_anchor = None if geo_anchor is None else (float(geo_anchor[0]), float(geo_anchor[1]))
        self._validate()

    def _validate(self):
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise InputError("triangle index out of range")
        if self.face_colors is not None and len(self.face_colors) != len(self.triangles):
            raise InputError(
                f"{len(self.face_colors)} face colors for {len(self.triangles)} triangles"
            )
        if len(self.triangles):
            v0, v1, v2 = self.corner_arrays()
            areas = 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)
            bad = np.nonzero(areas <= MIN_TRIANGLE_AREA)[0]
            if bad.size:
                raise InputError(f"degenerate triangle (area <= {MIN_TRIANGLE_AREA}) at index {bad[0]}")
        if self.geo_anchor is not None:
            _check_latlon(*self.geo_anchor)

    def corner_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The three (T, 3) corner position arrays, in triangle order."""
        tri = self.triangles
        return self.vertices[tri[:, 0]], self.vertices[tri[:, 1]], self.vertices[tri[:, 2]]

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not len(self.vertices):
            raise InputError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def projection(self) -> LocalProjection:
        if self.geo_anchor is None:
            raise InputError("mesh has no geo anchor")
        return LocalProjection(*self.geo_anchor)

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        colors_equal = (self.face_colors is None) == (other.face_colors is None) and (
            self.face_colors is None or np.array_equal(self.face_colors, other.face_colors)
        )
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and colors_equal
            and self.geo_anchor == other.geo_anchor
        )
