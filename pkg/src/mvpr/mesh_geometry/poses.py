"""Ground estimation and camera pose construction.

Yaw convention: 0 = north (+y), increasing clockwise when seen from above,
so east is pi/2. Pitch is positive nose-up, roll positive right-side-down.
A camera "standing on" sloped ground pitches and rolls with the slope, the
way a car-mounted camera would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError, OutsideMeshFootprint
from .core import Ray, TriangleMesh
from .raycast import raycast

DEFAULT_CAMERA_HEIGHT_M = 2.5
GROUND_TRACE_CLEARANCE_M = 10.0


@dataclass(frozen=True)
class GroundEstimate:
    ground_point: np.ndarray
    normal: np.ndarray  # unit, normal_z > 0

    def __post_init__(self):
        if float(self.normal[2]) <= 0.0:
            raise InputError("ground normal must point upward")


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray
    yaw: float  # radians, normalized to [0, 2*pi)
    pitch: float
    roll: float
    geo: tuple[float, float] | None = None  # (lat, lon) when an anchor is known

    def __post_init__(self):
        if not (-math.pi / 2 < self.pitch < math.pi / 2):
            raise InputError(f"pitch {self.pitch} outside (-pi/2, pi/2)")
        if not (-math.pi / 2 < self.roll < math.pi / 2):
            raise InputError(f"roll {self.roll} outside (-pi/2, pi/2)")
        object.__setattr__(self, "yaw", self.yaw % (2.0 * math.pi))
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64).reshape(3)
        )

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Camera (forward, right, up) unit vectors in the world frame."""
        sy, cy = math.sin(self.yaw), math.cos(self.yaw)
        f0 = np.array([sy, cy, 0.0])
        r0 = np.array([cy, -sy, 0.0])
        u0 = np.array([0.0, 0.0, 1.0])
        sp, cp = math.sin(self.pitch), math.cos(self.pitch)
        f1 = cp * f0 + sp * u0
        u1 = cp * u0 - sp * f0
        sr, cr = math.sin(self.roll), math.cos(self.roll)
        r2 = cr * r0 + sr * u1
        u2 = cr * u1 - sr * r0
        return f1, r2, u2


def estimate_ground(mesh: TriangleMesh, xy) -> GroundEstimate:
    """Trace straight down from above the mesh and take the highest hit."""
    if not mesh.num_triangles:
        raise InputError("cannot estimate ground on an empty mesh")
    x, y = float(xy[0]), float(xy[1])
    _, bmax = mesh.bounds()
    z_top = float(bmax[2]) + GROUND_TRACE_CLEARANCE_M
    ray = Ray(origin=(x, y, z_top), direction=(0.0, 0.0, -1.0))
    hit = raycast(mesh, ray)
    if hit is None:
        raise OutsideMeshFootprint(f"no ground below ({x:.3f}, {y:.3f})")
    normal = hit.normal if hit.normal[2] > 0 else -hit.normal
    if normal[2] <= 0.0:
        raise OutsideMeshFootprint(f"vertical surface below ({x:.3f}, {y:.3f})")
    return GroundEstimate(ground_point=hit.point, normal=normal)


def make_camera_pose(
    ground: GroundEstimate,
    heading: float,
    camera_height: float = DEFAULT_CAMERA_HEIGHT_M,
    geo: tuple[float, float] | None = None,
) -> CameraPose:
    """Camera at fixed height above the ground point, tilted with the slope.

    With forward axis f = (sin yaw, cos yaw, 0) and right axis
    r = (cos yaw, -sin yaw, 0), the ground normal n gives
    pitch = -atan2(n . f, n_z) and roll = atan2(n . r, n_z): ground rising
    ahead pitches the camera up, ground rising to the right rolls it left.
    """
    n = ground.normal
    sy, cy = math.sin(heading), math.cos(heading)
    nf = n[0] * sy + n[1] * cy
    nr = n[0] * cy - n[1] * sy
    pitch = -math.atan2(nf, n[2])
    roll = math.atan2(nr, n[2])
    position = np.array(
        [ground.ground_point[0], ground.ground_point[1], ground.ground_point[2] + camera_height]
    )
    return CameraPose(position=position, yaw=heading, pitch=pitch, roll=roll, geo=geo)
