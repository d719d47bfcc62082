"""The radiance-field model: sparse multi-resolution feature grids, input
encodings (learned grid / sinusoidal / none), and the MLP head predicting
scattered radiance. Full radiance is the network output plus the scene's
emission term."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .materials import LocalProps

FEATURE_INIT_SCALE = 1e-2


class GridError(Exception):
    pass


def voxel_hash(coords, grid_size: int):
    """Mixed-radix key x + y*g + z*g^2; injective over the lattice."""
    c = np.asarray(coords, dtype=np.int64)
    single = c.ndim == 1
    c = np.atleast_2d(c)
    if np.any(c < 0) or np.any(c >= grid_size):
        raise GridError(f"voxel coordinate outside [0,{grid_size})")
    g = np.int64(grid_size)
    key = c[:, 0] + c[:, 1] * g + c[:, 2] * g * g
    return int(key[0]) if single else key


@njit(cache=True)
def _tri_box_overlap(cx, cy, cz, h, v0, v1, v2):
    # Akenine-Moller triangle/AABB separating-axis test (cube voxel, half h)
    p0 = np.empty(3); p1 = np.empty(3); p2 = np.empty(3)
    p0[0] = v0[0] - cx; p0[1] = v0[1] - cy; p0[2] = v0[2] - cz
    p1[0] = v1[0] - cx; p1[1] = v1[1] - cy; p1[2] = v1[2] - cz
    p2[0] = v2[0] - cx; p2[1] = v2[1] - cy; p2[2] = v2[2] - cz
    # box axes
    for a in range(3):
        lo = min(p0[a], min(p1[a], p2[a]))
        hi = max(p0[a], max(p1[a], p2[a]))
        if lo > h or hi < -h:
            return False
    # triangle plane
    e0 = p1 - p0
    e1 = p2 - p1
    nx = e0[1] * e1[2] - e0[2] * e1[1]
    ny = e0[2] * e1[0] - e0[0] * e1[2]
    nz = e0[0] * e1[1] - e0[1] * e1[0]
    d = nx * p0[0] + ny * p0[1] + nz * p0[2]
    r = h * (abs(nx) + abs(ny) + abs(nz))
    if abs(d) > r:
        return False
    # 9 edge cross-product axes
    e2 = p0 - p2
    edges = (e0, e1, e2)
    for ei in range(3):
        e = edges[ei]
        # axis = cross(x, e), cross(y, e), cross(z, e)
        for a in range(3):
            if a == 0:
                axx, axy, axz = 0.0, -e[2], e[1]
            elif a == 1:
                axx, axy, axz = e[2], 0.0, -e[0]
            else:
                axx, axy, axz = -e[1], e[0], 0.0
            q0 = axx * p0[0] + axy * p0[1] + axz * p0[2]
            q1 = axx * p1[0] + axy * p1[1] + axz * p1[2]
            q2 = axx * p2[0] + axy * p2[1] + axz * p2[2]
            lo = min(q0, min(q1, q2))
            hi = max(q0, max(q1, q2))
            rb = h * (abs(axx) + abs(axy) + abs(axz))
            if lo > rb or hi < -rb:
                return False
    return True


@njit(cache=True)
def _occupied_voxel_keys(v0n, v1n, v2n, res):
    """Keys (voxel-coordinate hashes, grid size=res) of voxels overlapping
    at least one triangle. Vertices are in normalized [0,1] coordinates."""
    out = []
    inv = 1.0 / res
    h = 0.5 * inv + 1e-9
    for t in range(v0n.shape[0]):
        lo = np.empty(3); hi = np.empty(3)
        for a in range(3):
            lo[a] = min(v0n[t, a], min(v1n[t, a], v2n[t, a]))
            hi[a] = max(v0n[t, a], max(v1n[t, a], v2n[t, a]))
        i0 = max(0, min(res - 1, int(np.floor(lo[0] * res - 1e-9))))
        j0 = max(0, min(res - 1, int(np.floor(lo[1] * res - 1e-9))))
        k0 = max(0, min(res - 1, int(np.floor(lo[2] * res - 1e-9))))
        i1 = max(0, min(res - 1, int(np.floor(hi[0] * res + 1e-9))))
        j1 = max(0, min(res - 1, int(np.floor(hi[1] * res + 1e-9))))
        k1 = max(0, min(res - 1, int(np.floor(hi[2] * res + 1e-9))))
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                for k in range(k0, k1 + 1):
                    cx = (i + 0.5) * inv
                    cy = (j + 0.5) * inv
                    cz = (k + 0.5) * inv
                    if _tri_box_overlap(cx, cy, cz, h,
                                        v0n[t], v1n[t], v2n[t]):
                        out.append(i + j * res + k * res * res)
    return out


@dataclass
class GridLevelStats:
    resolution: int
    occupied_voxels: int
    stored_vertices: int
    density_percent: float
    feature_bytes: int


@dataclass
class GridLevel:
    resolution: int           # voxels per axis; vertex lattice is res+1
    keys: np.ndarray          # sorted unique vertex hashes (grid size res+1)
    features: Tensor          # [K, l]
    occupied_voxels: int = 0


@dataclass
class EncoderConfig:
    variant: str = "grid"     # grid | posenc | none
    levels: int = 5           # grid variant
    feat_dim: int = 16
    posenc_bands: int = 6

    def __post_init__(self):
        if self.variant not in ("grid", "posenc", "none"):
            raise ValueError(f"unknown encoder variant '{self.variant}'")


class FeatureGrid:
    """Sparse multi-resolution vertex features, trilinearly interpolated
    per level and averaged across levels."""

    def __init__(self, levels: list[GridLevel], feat_dim: int):
        self.levels = levels
        self.feat_dim = feat_dim
        self.missing_corner_count = 0

    @property
    def n_levels(self):
        return len(self.levels)

    def corner_lookup(self, level: GridLevel, x01):
        """Corner feature rows and trilinear weights for query points.
        Missing corners get index -1 (zero feature, no gradient)."""
        x01 = np.asarray(x01, dtype=np.float64)
        res = level.resolution
        scaled = np.clip(x01, 0.0, 1.0) * res
        base = np.minimum(scaled.astype(np.int64), res - 1)
        t = scaled - base
        g = np.int64(res + 1)
        q = len(x01)
        idx = np.empty((q, 8), dtype=np.int64)
        w = np.empty((q, 8))
        for corner in range(8):
            off = np.array([(corner >> 0) & 1, (corner >> 1) & 1,
                            (corner >> 2) & 1], dtype=np.int64)
            c = base + off
            key = c[:, 0] + c[:, 1] * g + c[:, 2] * g * g
            pos = np.searchsorted(level.keys, key)
            pos_c = np.minimum(pos, len(level.keys) - 1)
            found = level.keys[pos_c] == key if len(level.keys) else np.zeros(q, bool)
            idx[:, corner] = np.where(found, pos_c, -1)
            wx = np.where(off[0], t[:, 0], 1.0 - t[:, 0])
            wy = np.where(off[1], t[:, 1], 1.0 - t[:, 1])
            wz = np.where(off[2], t[:, 2], 1.0 - t[:, 2])
            w[:, corner] = wx * wy * wz
        self.missing_corner_count += int((idx < 0).sum())
        return idx, w

    def query(self, tape, x01) -> Tensor:
        """G(x): average of per-level trilinear interpolations."""
        acc = None
        for level in self.levels:
            idx, w = self.corner_lookup(level, x01)
            g = ad.trilinear_gather(tape, level.features, idx, w)
            acc = g if acc is None else ad.add(tape, acc, g)
        return ad.mul(tape, acc, np.asarray(1.0 / self.n_levels,
                                            dtype=acc.dtype))

    def stats(self) -> list[GridLevelStats]:
        out = []
        for lv in self.levels:
            r = lv.resolution
            out.append(GridLevelStats(
                resolution=r,
                occupied_voxels=lv.occupied_voxels,
                stored_vertices=len(lv.keys),
                density_percent=100.0 * lv.occupied_voxels / r ** 3,
                feature_bytes=len(lv.keys) * self.feat_dim * 4,
            ))
        return out


def occupied_voxels(scene, resolution: int) -> np.ndarray:
    """Sorted keys of voxels (at `resolution` per axis, over the padded
    scene AABB) that overlap at least one triangle."""
    v0n = scene.normalize_positions(scene.v0)
    v1n = scene.normalize_positions(scene.v1)
    v2n = scene.normalize_positions(scene.v2)
    keys = _occupied_voxel_keys(np.ascontiguousarray(v0n),
                                np.ascontiguousarray(v1n),
                                np.ascontiguousarray(v2n), resolution)
    if len(keys) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.asarray(keys, dtype=np.int64))


def build_sparse_grid(scene, levels: int, feat_dim: int, rng,
                      params: ParamStore, dtype=np.float32,
                      name_prefix: str = "grid") -> FeatureGrid:
    """Allocate vertex features only around occupied voxels, per level.
    Level i has 2^(i+1) voxels per axis (first level 2x2x2)."""
    if levels < 1:
        raise GridError("need at least one grid level")
    built = []
    for i in range(levels):
        res = 2 ** (i + 1)
        vox = occupied_voxels(scene, res)
        # vertex keys: the 8 corners of each occupied voxel, deduplicated
        vi = vox % res
        vj = (vox // res) % res
        vk = vox // (res * res)
        g = np.int64(res + 1)
        corner_keys = []
        for corner in range(8):
            ci = vi + ((corner >> 0) & 1)
            cj = vj + ((corner >> 1) & 1)
            ck = vk + ((corner >> 2) & 1)
            corner_keys.append(ci + cj * g + ck * g * g)
        keys = np.unique(np.concatenate(corner_keys)) if len(vox) else \
            np.zeros(0, dtype=np.int64)
        feats = rng.uniform(-FEATURE_INIT_SCALE, FEATURE_INIT_SCALE,
                            size=(len(keys), feat_dim)).astype(dtype)
        t = params.add(f"{name_prefix}{i}", feats)
        built.append(GridLevel(res, keys, t, occupied_voxels=len(vox)))
    return FeatureGrid(built, feat_dim)


def positional_encoding(x01, bands: int) -> np.ndarray:
    """Per axis and band j: sin(2^j pi x), cos(2^j pi x). Length 6*bands."""
    x01 = np.asarray(x01, dtype=np.float64)
    parts = []
    for j in range(bands):
        arg = (2.0 ** j) * np.pi * x01
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    return np.concatenate(parts, axis=1)


class RadianceField:
    """Encoder + MLP predicting scattered radiance N(x, wo); the full
    radiance adds the scene's emission term."""

    def __init__(self, scene, encoder: EncoderConfig, depth: int = 4,
                 width: int = 128, use_local_props: bool = True,
                 dtype=np.float32, rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.encoder = encoder
        self.depth = depth
        self.width = width
        self.use_local_props = use_local_props
        self.dtype = np.dtype(dtype)
        self.pad_min = scene.pad_min.copy()
        self.pad_max = scene.pad_max.copy()
        self.params = ParamStore()
        self.grid = None
        if encoder.variant == "grid":
            self.grid = build_sparse_grid(scene, encoder.levels,
                                          encoder.feat_dim, rng,
                                          self.params, dtype=self.dtype)
        self._init_mlp(rng)

    def encoding_dim(self) -> int:
        if self.encoder.variant == "grid":
            return self.encoder.feat_dim
        if self.encoder.variant == "posenc":
            return 6 * self.encoder.posenc_bands
        return 0

    def input_dim(self) -> int:
        d = 3 + self.encoding_dim() + 3      # position, encoding, wo
        if self.use_local_props:
            d += 3 + 3 + 3 + 2               # normal, f_d, f_r, roughness
        return d

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = []
        d_in = self.input_dim()
        for i in range(self.depth):
            d_out = 3 if i == self.depth - 1 else self.width
            dims.append((d_in, d_out))
            d_in = d_out
        return dims

    def _init_mlp(self, rng):
        # uniform [-1,1] scaled by 1/sqrt(fan_in), weights and biases alike
        for i, (d_in, d_out) in enumerate(self.layer_dims()):
            bound = 1.0 / np.sqrt(d_in)
            w = rng.uniform(-bound, bound, size=(d_in, d_out))
            b = rng.uniform(-bound, bound, size=(d_out,))
            self.params.add(f"w{i}", w.astype(self.dtype))
            self.params.add(f"b{i}", b.astype(self.dtype))

    def assemble_input(self, tape, props: LocalProps):
        # normalize to the padded unit cube so position is on the same
        # scale as the other inputs and the sinusoids start at low
        # frequencies
        x01 = ((props.position - self.pad_min)
               / (self.pad_max - self.pad_min))
        parts = [x01.astype(self.dtype)]
        if self.encoder.variant == "grid":
            parts.append(self.grid.query(tape, props.position))
        elif self.encoder.variant == "posenc":
            parts.append(positional_encoding(
                x01, self.encoder.posenc_bands).astype(self.dtype))
        parts.append(props.wo.astype(self.dtype))
        if self.use_local_props:
            parts.append(props.normal.astype(self.dtype))
            parts.append(props.diffuse.astype(self.dtype))
            parts.append(props.specular.astype(self.dtype))
            parts.append(props.roughness.astype(self.dtype))
        return ad.concat(tape, parts, axis=1)

    def forward_N(self, props: LocalProps, tape=None) -> Tensor:
        """Raw (unclamped) scattered-radiance prediction, [k,3]."""
        h = self.assemble_input(tape, props)
        for i in range(self.depth):
            h = ad.affine(tape, h, self.params[f"w{i}"], self.params[f"b{i}"])
            if i < self.depth - 1:
                h = ad.relu(tape, h)
        return h

    def radiance_L(self, scene, hits, wo, tape=None) -> Tensor:
        """L = N(x, wo) + E(x, wo)."""
        from .materials import local_props
        props = local_props(scene, hits, wo)
        n = self.forward_N(props, tape=tape)
        e = scene.emission_at_hits(hits, wo).astype(self.dtype)
        return ad.add(tape, n, e)

    def rebuild_grid(self, scene, rng):
        """Re-derive sparse occupancy for modified geometry, carrying over
        features whose vertex keys exist in both old and new grids."""
        if self.grid is None:
            self.pad_min = scene.pad_min.copy()
            self.pad_max = scene.pad_max.copy()
            return
        old_levels = self.grid.levels
        new_params = ParamStore()
        for name, t in self.params.items():
            if not name.startswith("grid"):
                new_params.add(name, t.data)
        self.pad_min = scene.pad_min.copy()
        self.pad_max = scene.pad_max.copy()
        new_grid = build_sparse_grid(scene, self.encoder.levels,
                                     self.encoder.feat_dim, rng, new_params,
                                     dtype=self.dtype)
        for old, new in zip(old_levels, new_grid.levels):
            pos = np.searchsorted(old.keys, new.keys)
            pos_c = np.minimum(pos, max(len(old.keys) - 1, 0))
            if len(old.keys):
                match = old.keys[pos_c] == new.keys
                new.features.data[match] = old.features.data[pos_c[match]]
        self.grid = new_grid
        self.params = new_params
