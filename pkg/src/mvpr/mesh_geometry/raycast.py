"""Ray/triangle intersection and BVH-accelerated mesh ray casting.

Conventions shared by every code path in this module:
  - hits require t >= MIN_HIT_T (grazing self-hits at the origin are ignored)
  - boundary points (edges, corners) count as hits
  - when two triangles are hit at exactly the same t, the lower triangle
    id wins, so rays through shared edges resolve deterministically
  - hit normals are unit length and oriented against the ray direction
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InputError
from .core import MIN_TRIANGLE_AREA, Ray, RayHit, TriangleMesh

MIN_HIT_T = 1e-9
_PARALLEL_EPS = 1e-14


def _intersect_tri(o, d, v0, v1, v2):
    """Moller-Trumbore on one triangle. Returns t or None (no hit)."""
    e1x, e1y, e1z = v1[0] - v0[0], v1[1] - v0[1], v1[2] - v0[2]
    e2x, e2y, e2z = v2[0] - v0[0], v2[1] - v0[1], v2[2] - v0[2]
    px = d[1] * e2z - d[2] * e2y
    py = d[2] * e2x - d[0] * e2z
    pz = d[0] * e2y - d[1] * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < _PARALLEL_EPS:
        return None
    inv = 1.0 / det
    tx, ty, tz = o[0] - v0[0], o[1] - v0[1], o[2] - v0[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return None
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return None
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t < MIN_HIT_T:
        return None
    return t


def _oriented_normal(d, v0, v1, v2) -> np.ndarray:
    n = np.cross(v1 - v0, v2 - v0)
    n /= np.linalg.norm(n)
    if float(n @ d) > 0.0:
        n = -n
    return n


def _make_hit(ray: Ray, t: float, tri_id: int, v0, v1, v2) -> RayHit:
    point = ray.origin + t * ray.direction
    return RayHit(
        t=float(t),
        point=point,
        normal=_oriented_normal(ray.direction, v0, v1, v2),
        triangle_id=int(tri_id),
    )


def ray_triangle_intersect(ray: Ray, v0, v1, v2) -> RayHit | None:
    """Intersect a single triangle; edge and corner hits count."""
    v0 = np.asarray(v0, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    area = 0.5 * float(np.linalg.norm(np.cross(v1 - v0, v2 - v0)))
    if area <= MIN_TRIANGLE_AREA:
        raise InputError(f"degenerate triangle (area {area:g})")
    t = _intersect_tri(ray.origin, ray.direction, v0, v1, v2)
    if t is None:
        return None
    return _make_hit(ray, t, 0, v0, v1, v2)


def _slab_range(origin, direction, bmin, bmax):
    """Entry/exit t of a ray against an AABB, or None when it misses."""
    tmin, tmax = -math.inf, math.inf
    for axis in range(3):
        o, d = origin[axis], direction[axis]
        lo, hi = bmin[axis], bmax[axis]
        if d == 0.0:
            if o < lo or o > hi:
                return None
            continue
        t0 = (lo - o) / d
        t1 = (hi - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        tmin = max(tmin, t0)
        tmax = min(tmax, t1)
        if tmin > tmax:
            return None
    return tmin, tmax


class Bvh:
    """Median-split bounding volume hierarchy over mesh triangles.

    Traversal prunes a node only when its entry distance strictly exceeds
    the current best t, so equal-t candidates (shared-edge ties) are never
    skipped and results match the exhaustive scan exactly.
    """

    LEAF_SIZE = 4

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        v0, v1, v2 = (
            mesh.corner_arrays() if mesh.num_triangles else (np.zeros((0, 3)),) * 3
        )
        self._tri_min = np.minimum(np.minimum(v0, v1), v2)
        self._tri_max = np.maximum(np.maximum(v0, v1), v2)
        centroids = (v0 + v1 + v2) / 3.0
        # nodes: (bmin, bmax, left, right, start, count); leaf iff count > 0
        self._nodes: list[tuple] = []
        self._order = np.arange(mesh.num_triangles)
        if mesh.num_triangles:
            self._build(0, mesh.num_triangles, centroids)

    def _build(self, start: int, end: int, centroids: np.ndarray) -> int:
        idx = self._order[start:end]
        bmin = self._tri_min[idx].min(axis=0)
        bmax = self._tri_max[idx].max(axis=0)
        node_id = len(self._nodes)
        self._nodes.append(None)
        count = end - start
        if count <= self.LEAF_SIZE:
            self._nodes[node_id] = (bmin, bmax, -1, -1, start, count)
            return node_id
        c = centroids[idx]
        extents = c.max(axis=0) - c.min(axis=0)
        axis = int(np.argmax(extents))
        if extents[axis] == 0.0:  # coincident centroids: cannot split
            self._nodes[node_id] = (bmin, bmax, -1, -1, start, count)
            return node_id
        # median split; stable sort keeps triangle ids ordered within ties
        local = np.argsort(c[:, axis], kind="stable")
        self._order[start:end] = idx[local]
        mid = start + count // 2
        left = self._build(start, mid, centroids)
        right = self._build(mid, end, centroids)
        self._nodes[node_id] = (bmin, bmax, left, right, -1, 0)
        return node_id

    def raycast(self, ray: Ray) -> RayHit | None:
        if not self._nodes:
            return None
        o, d = ray.origin, ray.direction
        verts = self.mesh.vertices
        tris = self.mesh.triangles
        best_t = math.inf
        best_id = -1
        stack = [0]
        while stack:
            node = self._nodes[stack.pop()]
            bmin, bmax, left, right, start, count = node
            rng = _slab_range(o, d, bmin, bmax)
            if rng is None or rng[1] < MIN_HIT_T or rng[0] > best_t:
                continue
            if count > 0:
                for tri_id in self._order[start : start + count]:
                    a, b, c = tris[tri_id]
                    t = _intersect_tri(o, d, verts[a], verts[b], verts[c])
                    if t is None:
                        continue
                    if t < best_t or (t == best_t and tri_id < best_id):
                        best_t, best_id = t, int(tri_id)
            else:
                stack.append(right)
                stack.append(left)
        if best_id < 0:
            return None
        a, b, c = tris[best_id]
        return _make_hit(ray, best_t, best_id, verts[a], verts[b], verts[c])


def raycast_scan(mesh: TriangleMesh, ray: Ray) -> RayHit | None:
    """Exhaustive reference scan with the same tie-break rule as the BVH."""
    o, d = ray.origin, ray.direction
    verts = mesh.vertices
    best_t = math.inf
    best_id = -1
    for tri_id, (a, b, c) in enumerate(mesh.triangles):
        t = _intersect_tri(o, d, verts[a], verts[b], verts[c])
        if t is not None and t < best_t:
            best_t, best_id = t, tri_id
    if best_id < 0:
        return None
    a, b, c = mesh.triangles[best_id]
    return _make_hit(ray, best_t, best_id, verts[a], verts[b], verts[c])


def mesh_bvh(mesh: TriangleMesh) -> Bvh:
    """The mesh's BVH, built once and cached on the mesh object."""
    bvh = getattr(mesh, "_bvh", None)
    if bvh is None:
        bvh = Bvh(mesh)
        mesh._bvh = bvh
    return bvh


def raycast(mesh: TriangleMesh, ray: Ray) -> RayHit | None:
    """Nearest hit over all mesh triangles (BVH accelerated)."""
    return mesh_bvh(mesh).raycast(ray)


def intersect_rays(mesh: TriangleMesh, origins: np.ndarray, directions: np.ndarray,
                   block: int = 4096):
    """Vectorized nearest-hit query for many rays at once (renderer kernel).

    Returns (t, tri_id) arrays; tri_id is -1 where a ray misses. Triangle
    blocks are scanned in id order and ties keep the earlier (lower) id,
    matching the scalar tie-break rule.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    best_t = np.full(n, np.inf)
    best_id = np.full(n, -1, dtype=np.int64)
    if not mesh.num_triangles:
        return best_t, best_id
    v0, v1, v2 = mesh.corner_arrays()
    for lo in range(0, mesh.num_triangles, block):
        hi = min(lo + block, mesh.num_triangles)
        e1 = v1[lo:hi] - v0[lo:hi]  # (B, 3)
        e2 = v2[lo:hi] - v0[lo:hi]
        p = np.cross(directions[:, None, :], e2[None, :, :])  # (N, B, 3)
        det = np.einsum("bk,nbk->nb", e1, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            tvec = origins[:, None, :] - v0[None, lo:hi, :]
            u = np.einsum("nbk,nbk->nb", tvec, p) * inv
            q = np.cross(tvec, e1[None, :, :])
            v = np.einsum("nk,nbk->nb", directions, q) * inv
            t = np.einsum("bk,nbk->nb", e2, q) * inv
        ok = (
            (np.abs(det) >= _PARALLEL_EPS)
            & (u >= 0.0) & (u <= 1.0)
            & (v >= 0.0) & (u + v <= 1.0)
            & (t >= MIN_HIT_T)
        )
        t = np.where(ok, t, np.inf)
        col = np.argmin(t, axis=1)  # first minimum -> lowest id in block
        t_block = t[np.arange(n), col]
        better = t_block < best_t
        best_t[better] = t_block[better]
        best_id[better] = col[better] + lo
    return best_t, best_id
