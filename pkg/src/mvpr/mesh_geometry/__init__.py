from .core import Ray, RayHit, TriangleMesh
from .meshio import (
    load_mesh,
    load_obj,
    load_palette,
    load_ply,
    save_obj,
    save_ply,
    save_png,
    save_ppm,
)
from .poses import CameraPose, GroundEstimate, estimate_ground, make_camera_pose
from .raycast import Bvh, ray_triangle_intersect, raycast
from .render import RenderedImage, render_view

__all__ = [
    "Bvh",
    "CameraPose",
    "GroundEstimate",
    "Ray",
    "RayHit",
    "RenderedImage",
    "TriangleMesh",
    "estimate_ground",
    "load_mesh",
    "load_obj",
    "load_palette",
    "load_ply",
    "make_camera_pose",
    "ray_triangle_intersect",
    "raycast",
    "render_view",
    "save_obj",
    "save_ply",
    "save_png",
    "save_ppm",
]
