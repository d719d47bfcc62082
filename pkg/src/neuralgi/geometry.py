"""Triangle-mesh geometry: BVH ray casting and uniform surface sampling.

Everything is stored as flat numpy arrays so the hot intersection loops can
be compiled with numba. Geometry math runs in float64. The BVH uses a
median split on the longest centroid axis; traversal results are required
to match a brute-force loop exactly (tested).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

RAY_EPS_SCALE = 1e-4   # secondary-ray origin offset, times scene diagonal


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = np.inf

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = np.asarray(self.direction, dtype=np.float64)
        if not (self.t_min >= 0 and self.t_min < self.t_max):
            raise ValueError("require 0 <= t_min < t_max")
        n = np.linalg.norm(self.direction)
        if abs(n - 1.0) > 1e-6:
            self.direction = self.direction / n


@dataclass
class SurfaceHit:
    position: np.ndarray
    geo_normal: np.ndarray
    sh_normal: np.ndarray
    material_id: int
    triangle_id: int
    t: float


@dataclass
class HitBatch:
    """Struct-of-arrays form of many SurfaceHits; valid marks real hits."""
    valid: np.ndarray        # [n] bool
    position: np.ndarray     # [n,3]
    geo_normal: np.ndarray   # [n,3]
    sh_normal: np.ndarray    # [n,3]
    material_id: np.ndarray  # [n] int
    triangle_id: np.ndarray  # [n] int
    t: np.ndarray            # [n]

    def __len__(self):
        return len(self.valid)

    def select(self, mask):
        return HitBatch(self.valid[mask], self.position[mask],
                        self.geo_normal[mask], self.sh_normal[mask],
                        self.material_id[mask], self.triangle_id[mask],
                        self.t[mask])


class BvhError(Exception):
    pass


@dataclass
class Bvh:
    node_min: np.ndarray    # [Nn,3]
    node_max: np.ndarray    # [Nn,3]
    node_right: np.ndarray  # [Nn] int32; internal: right child (left=node+1); leaf: -1
    node_start: np.ndarray  # [Nn] leaf triangle range start into tri_order
    node_count: np.ndarray  # [Nn] leaf triangle count (0 for internal)
    tri_order: np.ndarray   # [T] reordered triangle indices


def build_bvh(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray,
              leaf_size: int = 4) -> Bvh:
    tcount = len(v0)
    if tcount == 0:
        raise BvhError("cannot build a BVH over an empty scene")
    lo = np.minimum(np.minimum(v0, v1), v2)
    hi = np.maximum(np.maximum(v0, v1), v2)
    centroid = (lo + hi) * 0.5

    order = np.arange(tcount, dtype=np.int64)
    node_min, node_max, node_right, node_start, node_count = [], [], [], [], []

    def new_node():
        node_min.append(None); node_max.append(None)
        node_right.append(-1); node_start.append(0); node_count.append(0)
        return len(node_right) - 1

    def build(start, end):
        # depth-first layout: left child is always idx + 1
        idx = new_node()
        tris = order[start:end]
        node_min[idx] = lo[tris].min(axis=0)
        node_max[idx] = hi[tris].max(axis=0)
        if end - start <= leaf_size:
            node_start[idx] = start
            node_count[idx] = end - start
            return idx
        c = centroid[tris]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (end - start) // 2
        part = np.argsort(c[:, axis], kind="stable")
        order[start:end] = tris[part]
        build(start, start + mid)
        node_right[idx] = build(start + mid, end)
        return idx

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10000))
    try:
        build(0, tcount)
    finally:
        sys.setrecursionlimit(old)

    return Bvh(np.asarray(node_min, dtype=np.float64),
               np.asarray(node_max, dtype=np.float64),
               np.asarray(node_right, dtype=np.int32),
               np.asarray(node_start, dtype=np.int64),
               np.asarray(node_count, dtype=np.int64),
               order)


@njit(cache=True, fastmath=False)
def _tri_hit(ox, oy, oz, dx, dy, dz, ax, ay, az, e1x, e1y, e1z,
             e2x, e2y, e2z, tmin, tmax):
    # Moeller-Trumbore; returns t or -1 on miss
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-14:
        return -1.0
    inv = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -1e-9 or u > 1.0 + 1e-9:
        return -1.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -1e-9 or u + v > 1.0 + 1e-9:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= tmin or t >= tmax:
        return -1.0
    return t


@njit(cache=True)
def _intersect_bvh_kernel(nmin, nmax, nright, nstart, ncount, order,
                          v0, e1, e2, o, d, tmin, tmax, out_t, out_tri):
    nrays = o.shape[0]
    stack = np.empty(128, dtype=np.int32)
    for r in range(nrays):
        ox, oy, oz = o[r, 0], o[r, 1], o[r, 2]
        dx, dy, dz = d[r, 0], d[r, 1], d[r, 2]
        best_t = tmax[r]
        best_tri = -1
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            # slab test; a zero direction component hits iff the origin
            # lies inside that slab
            tn = tmin[r]
            tf = best_t
            miss = False
            for ax in range(3):
                da = d[r, ax]
                oa = o[r, ax]
                if da != 0.0:
                    inv = 1.0 / da
                    t0 = (nmin[node, ax] - oa) * inv
                    t1 = (nmax[node, ax] - oa) * inv
                    if t0 > t1:
                        t0, t1 = t1, t0
                    if t0 > tn:
                        tn = t0
                    if t1 < tf:
                        tf = t1
                elif oa < nmin[node, ax] or oa > nmax[node, ax]:
                    miss = True
                    break
            if miss or tn > tf + 1e-12:
                continue
            if nright[node] < 0:
                s = nstart[node]
                for k in range(s, s + ncount[node]):
                    tri = order[k]
                    t = _tri_hit(ox, oy, oz, dx, dy, dz,
                                 v0[tri, 0], v0[tri, 1], v0[tri, 2],
                                 e1[tri, 0], e1[tri, 1], e1[tri, 2],
                                 e2[tri, 0], e2[tri, 1], e2[tri, 2],
                                 tmin[r], best_t)
                    if t > 0.0:
                        best_t = t
                        best_tri = tri
            else:
                stack[sp] = node + 1
                stack[sp + 1] = nright[node]
                sp += 2
        out_t[r] = best_t
        out_tri[r] = best_tri


@njit(cache=True)
def _intersect_brute_kernel(v0, e1, e2, o, d, tmin, tmax, out_t, out_tri):
    nrays = o.shape[0]
    ntri = v0.shape[0]
    for r in range(nrays):
        best_t = tmax[r]
        best_tri = -1
        for tri in range(ntri):
            t = _tri_hit(o[r, 0], o[r, 1], o[r, 2], d[r, 0], d[r, 1], d[r, 2],
                         v0[tri, 0], v0[tri, 1], v0[tri, 2],
                         e1[tri, 0], e1[tri, 1], e1[tri, 2],
                         e2[tri, 0], e2[tri, 1], e2[tri, 2],
                         tmin[r], best_t)
            if t > 0.0:
                best_t = t
                best_tri = tri
        out_t[r] = best_t
        out_tri[r] = best_tri


def intersect_rays(bvh: Bvh, v0, e1, e2, origins, dirs, t_min, t_max):
    """Nearest hit per ray. Returns (tri_id[n], t[n]); tri_id -1 on miss."""
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    n = origins.shape[0]
    t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,)).copy()
    t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,)).copy()
    out_t = np.empty(n, dtype=np.float64)
    out_tri = np.empty(n, dtype=np.int64)
    _intersect_bvh_kernel(bvh.node_min, bvh.node_max, bvh.node_right,
                          bvh.node_start, bvh.node_count, bvh.tri_order,
                          v0, e1, e2, origins, dirs, t_min, t_max,
                          out_t, out_tri)
    return out_tri, out_t


def intersect_rays_brute(v0, e1, e2, origins, dirs, t_min, t_max):
    """Brute-force nearest hit (oracle for the BVH path)."""
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    n = origins.shape[0]
    t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,)).copy()
    t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,)).copy()
    out_t = np.empty(n, dtype=np.float64)
    out_tri = np.empty(n, dtype=np.int64)
    _intersect_brute_kernel(v0, e1, e2, origins, dirs, t_min, t_max,
                            out_t, out_tri)
    return out_tri, out_t


class AreaTable:
    """Cumulative per-triangle areas for uniform surface sampling."""

    def __init__(self, tri_indices: np.ndarray, areas: np.ndarray):
        if len(tri_indices) == 0:
            raise ValueError("empty area table")
        self.tri_indices = np.asarray(tri_indices, dtype=np.int64)
        self.areas = np.asarray(areas, dtype=np.float64)
        self.cumulative = np.cumsum(self.areas)
        self.total_area = float(self.cumulative[-1])

    def pick(self, u: np.ndarray) -> np.ndarray:
        """Triangle indices chosen proportionally to area; u in [0,1)."""
        slot = np.searchsorted(self.cumulative, u * self.total_area,
                               side="right")
        slot = np.minimum(slot, len(self.cumulative) - 1)
        return self.tri_indices[slot]


def triangle_areas(v0, v1, v2) -> np.ndarray:
    return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)


def sample_triangle_points(v0, v1, v2, u1, u2):
    """Uniform point in each triangle via the sqrt barycentric warp."""
    su = np.sqrt(u1)[:, None]
    b0 = 1.0 - su
    b1 = (u2[:, None]) * su
    return v0 * b0 + v1 * b1 + v2 * (1.0 - b0 - b1)


def make_frame(n: np.ndarray):
    """Orthonormal tangent/bitangent for unit normals n [k,3] (branchless)."""
    n = np.asarray(n, dtype=np.float64)
    sign = np.where(n[:, 2] >= 0.0, 1.0, -1.0)
    a = -1.0 / (sign + n[:, 2])
    b = n[:, 0] * n[:, 1] * a
    tangent = np.stack([1.0 + sign * n[:, 0] ** 2 * a, sign * b,
                        -sign * n[:, 0]], axis=1)
    bitangent = np.stack([b, sign + n[:, 1] ** 2 * a, -n[:, 1]], axis=1)
    return tangent, bitangent


def sample_direction_uniform(normals: np.ndarray, two_sided, u1, u2):
    """Uniform directions on the hemisphere around each normal (or full
    sphere when two_sided). Returns (dirs [k,3], pdf [k] per steradian)."""
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    k = normals.shape[0]
    u1 = np.asarray(u1, dtype=np.float64).reshape(k)
    u2 = np.asarray(u2, dtype=np.float64).reshape(k)
    two = np.broadcast_to(np.asarray(two_sided, dtype=bool), (k,))

    z = np.where(two, 1.0 - 2.0 * u1, u1)
    phi = 2.0 * np.pi * u2
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    local = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    t, bt = make_frame(normals)
    dirs = (local[:, 0:1] * t + local[:, 1:2] * bt
            + local[:, 2:3] * normals)
    pdf = np.where(two, 1.0 / (4.0 * np.pi), 1.0 / (2.0 * np.pi))
    return dirs, pdf
