"""Runtime scene: triangle arrays, material table, emitters, BVH, AABB."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .geometry import AreaTable, Bvh, HitBatch
from .materials import MaterialTable, KIND_MIRROR


class SceneError(Exception):
    pass


@dataclass
class Scene:
    v0: np.ndarray            # [T,3]
    v1: np.ndarray
    v2: np.ndarray
    material_id: np.ndarray   # [T] int
    mats: MaterialTable
    emission: np.ndarray      # [T,3] emitted radiance (front side)
    em_two_sided: np.ndarray  # [T] bool
    vertex_normals: np.ndarray | None = None   # [T,3,3] optional

    # derived, filled by finalize()
    e1: np.ndarray = field(default=None, repr=False)
    e2: np.ndarray = field(default=None, repr=False)
    geo_normal: np.ndarray = field(default=None, repr=False)
    areas: np.ndarray = field(default=None, repr=False)
    bvh: Bvh = field(default=None, repr=False)
    aabb_min: np.ndarray = None
    aabb_max: np.ndarray = None
    pad_min: np.ndarray = None
    pad_max: np.ndarray = None
    diagonal: float = 0.0
    ray_eps: float = 0.0
    area_all: AreaTable = None
    area_train: AreaTable = None      # non-specular triangles only
    em_table: AreaTable = None        # emissive triangles
    em_total_area: float = 0.0

    def finalize(self):
        self.v0 = np.asarray(self.v0, dtype=np.float64)
        self.v1 = np.asarray(self.v1, dtype=np.float64)
        self.v2 = np.asarray(self.v2, dtype=np.float64)
        if len(self.v0) == 0:
            raise SceneError("scene has no triangles")
        for arr in (self.v0, self.v1, self.v2):
            if not np.all(np.isfinite(arr)):
                raise SceneError("scene vertices contain NaN/Inf")

        areas = geometry.triangle_areas(self.v0, self.v1, self.v2)
        lo = np.minimum(np.minimum(self.v0, self.v1), self.v2).min(axis=0)
        hi = np.maximum(np.maximum(self.v0, self.v1), self.v2).max(axis=0)
        scale2 = float(np.sum((hi - lo) ** 2))
        keep = areas > 1e-12 * max(scale2, 1e-30)
        if not np.all(keep):
            warnings.warn(f"dropping {int((~keep).sum())} degenerate triangles")
            self.v0, self.v1, self.v2 = self.v0[keep], self.v1[keep], self.v2[keep]
            self.material_id = self.material_id[keep]
            self.emission = self.emission[keep]
            self.em_two_sided = self.em_two_sided[keep]
            if self.vertex_normals is not None:
                self.vertex_normals = self.vertex_normals[keep]
            areas = areas[keep]
        if len(self.v0) == 0:
            raise SceneError("all triangles degenerate")

        self.material_id = np.asarray(self.material_id, dtype=np.int64)
        self.emission = np.asarray(self.emission, dtype=np.float64)
        self.em_two_sided = np.asarray(self.em_two_sided, dtype=bool)
        self.e1 = self.v1 - self.v0
        self.e2 = self.v2 - self.v0
        n = np.cross(self.e1, self.e2)
        self.geo_normal = n / np.linalg.norm(n, axis=1, keepdims=True)
        self.areas = areas

        self.aabb_min = np.minimum(np.minimum(self.v0, self.v1), self.v2).min(axis=0)
        self.aabb_max = np.maximum(np.maximum(self.v0, self.v1), self.v2).max(axis=0)
        extent = self.aabb_max - self.aabb_min
        extent = np.where(extent <= 0, 1e-6, extent)
        # 1% padding so boundary surfaces sit strictly inside [0,1]^3
        self.pad_min = self.aabb_min - 0.01 * extent
        self.pad_max = self.aabb_max + 0.01 * extent
        self.diagonal = float(np.linalg.norm(self.aabb_max - self.aabb_min))
        self.ray_eps = geometry.RAY_EPS_SCALE * self.diagonal

        self.bvh = geometry.build_bvh(self.v0, self.v1, self.v2)

        all_idx = np.arange(len(self.v0))
        self.area_all = AreaTable(all_idx, areas)
        non_spec = self.mats.kind[self.material_id] != KIND_MIRROR
        if np.any(non_spec):
            self.area_train = AreaTable(all_idx[non_spec], areas[non_spec])
        else:
            self.area_train = None
        emissive = np.any(self.emission > 0, axis=1)
        if np.any(emissive):
            self.em_table = AreaTable(all_idx[emissive], areas[emissive])
            self.em_total_area = self.em_table.total_area
        else:
            self.em_table = None
        return self

    # ---- queries -------------------------------------------------------

    def intersect_batch(self, origins, dirs, t_min=0.0, t_max=np.inf) -> HitBatch:
        tri, t = geometry.intersect_rays(self.bvh, self.v0, self.e1, self.e2,
                                         origins, dirs, t_min, t_max)
        return self.make_hits(origins, dirs, tri, t)

    def occluded(self, origins, dirs, t_max) -> np.ndarray:
        tri, _ = geometry.intersect_rays(self.bvh, self.v0, self.e1, self.e2,
                                         origins, dirs,
                                         np.zeros(len(origins)), t_max)
        return tri >= 0

    def make_hits(self, origins, dirs, tri, t) -> HitBatch:
        valid = tri >= 0
        safe = np.where(valid, tri, 0)
        pos = np.asarray(origins) + t[:, None] * np.asarray(dirs)
        geo_n = self.geo_normal[safe]
        sh_n = self.shading_normals(safe, pos)
        return HitBatch(valid, pos, geo_n, sh_n,
                        self.material_id[safe], np.where(valid, tri, -1), t)

    def shading_normals(self, tri, pos):
        if self.vertex_normals is None:
            return self.geo_normal[tri]
        # barycentric interpolation of per-vertex normals
        d = pos - self.v0[tri]
        e1, e2 = self.e1[tri], self.e2[tri]
        d11 = np.einsum("ij,ij->i", e1, e1)
        d12 = np.einsum("ij,ij->i", e1, e2)
        d22 = np.einsum("ij,ij->i", e2, e2)
        dp1 = np.einsum("ij,ij->i", d, e1)
        dp2 = np.einsum("ij,ij->i", d, e2)
        det = d11 * d22 - d12 * d12
        det = np.where(np.abs(det) < 1e-30, 1.0, det)
        u = (d22 * dp1 - d12 * dp2) / det
        v = (d11 * dp2 - d12 * dp1) / det
        vn = self.vertex_normals[tri]
        n = (1 - u - v)[:, None] * vn[:, 0] + u[:, None] * vn[:, 1] + v[:, None] * vn[:, 2]
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.where(norm > 1e-12, n / np.maximum(norm, 1e-12),
                        self.geo_normal[tri])

    def hits_from_surface_samples(self, tri, pos) -> HitBatch:
        k = len(tri)
        return HitBatch(np.ones(k, dtype=bool), pos, self.geo_normal[tri],
                        self.shading_normals(tri, pos), self.material_id[tri],
                        tri, np.zeros(k))

    def sample_surface(self, n: int, rng, table: AreaTable | None = None):
        """Uniform-by-area surface points. Returns (HitBatch, pdf per m^2)."""
        if table is None:
            table = self.area_all
        u = rng.random((n, 3))
        tri = table.pick(u[:, 0])
        pos = geometry.sample_triangle_points(self.v0[tri], self.v1[tri],
                                              self.v2[tri], u[:, 1], u[:, 2])
        pdf = np.full(n, 1.0 / table.total_area)
        return self.hits_from_surface_samples(tri, pos), pdf

    def emitted(self, tri, out_dir) -> np.ndarray:
        """Emission toward out_dir (away from the surface) at triangles tri.
        One-sided emitters radiate only from their front (normal) side."""
        tri = np.asarray(tri)
        safe = np.where(tri >= 0, tri, 0)
        facing = np.einsum("ij,ij->i", self.geo_normal[safe],
                           np.asarray(out_dir)) > 0
        front = facing | self.em_two_sided[safe]
        e = self.emission[safe] * front[:, None]
        return np.where((tri >= 0)[:, None], e, 0.0)

    def emission_at_hits(self, hits: HitBatch, wo) -> np.ndarray:
        e = self.emitted(hits.triangle_id, wo)
        return e * hits.valid[:, None]

    def offset_origins(self, pos, geo_n, dirs):
        """Offset ray origins along the geometric normal (toward the side
        the ray leaves from) to avoid self-intersection."""
        side = np.sign(np.einsum("ij,ij->i", geo_n, dirs))[:, None]
        return pos + self.ray_eps * side * geo_n

    def normalize_positions(self, pos):
        return (pos - self.pad_min) / (self.pad_max - self.pad_min)
