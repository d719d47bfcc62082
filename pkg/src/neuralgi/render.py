"""Image synthesis: direct field evaluation (LHS), one scattering step of
Monte Carlo integration over field queries (RHS), residual visualization,
the path-tracing ground-truth oracle, and image metrics."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import transport
from .materials import local_props


@dataclass
class Camera:
    origin: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_deg: float
    width: int
    height: int

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.look_at = np.asarray(self.look_at, dtype=np.float64)
        self.up = np.asarray(self.up, dtype=np.float64)
        if not (0 < self.fov_deg < 180):
            raise ValueError("fov must be in (0,180) degrees")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        fwd = self.look_at - self.origin
        self._fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(self._fwd, self.up)
        self._right = right / np.linalg.norm(right)
        self._cup = np.cross(self._right, self._fwd)

    def rays(self, jitter: np.ndarray):
        """One ray per pixel; jitter [H*W,2] in [0,1) positions the sample
        inside each pixel (box filter)."""
        h, w = self.height, self.width
        px = np.tile(np.arange(w), h).astype(np.float64)
        py = np.repeat(np.arange(h), w).astype(np.float64)
        sx = (px + jitter[:, 0]) / w * 2.0 - 1.0
        sy = 1.0 - (py + jitter[:, 1]) / h * 2.0
        tan_half = np.tan(np.radians(self.fov_deg) * 0.5)
        aspect = w / h
        d = (self._fwd[None, :]
             + (sx * tan_half * aspect)[:, None] * self._right[None, :]
             + (sy * tan_half)[:, None] * self._cup[None, :])
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        o = np.broadcast_to(self.origin, d.shape).copy()
        return o, d


@dataclass
class Film:
    width: int
    height: int
    accum: np.ndarray = None     # [H,W,3] radiance sums
    count: np.ndarray = None     # [H,W] samples per pixel

    def __post_init__(self):
        if self.accum is None:
            self.accum = np.zeros((self.height, self.width, 3))
        if self.count is None:
            self.count = np.zeros((self.height, self.width), dtype=np.int64)

    def splat_pass(self, values: np.ndarray):
        """Add one value per pixel, row-major flattened."""
        self.accum += values.reshape(self.height, self.width, 3)
        self.count += 1

    def image(self) -> np.ndarray:
        if np.any(self.count == 0):
            raise ValueError("film has pixels with zero samples")
        return self.accum / self.count[:, :, None]


def _pass_rng(seed: int, index: int):
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def _first_nonspecular(scene, camera, rng):
    jitter = rng.random((camera.width * camera.height, 2))
    o, d = camera.rays(jitter)
    return transport.trace_to_nonspecular(scene, o, d)


def render_lhs(scene, field, camera, spp: int, seed: int = 0) -> Film:
    """Per pixel: camera ray, mirror chain, then L = N + E at the first
    non-specular hit; misses contribute zero."""
    film = Film(camera.width, camera.height)
    for s in range(spp):
        rng = _pass_rng(seed, s)
        hits, dirs, thru, _ = _first_nonspecular(scene, camera, rng)
        vals = np.zeros((len(hits), 3))
        if np.any(hits.valid):
            sel = hits.select(hits.valid)
            wo = -dirs[hits.valid]
            L = field.radiance_L(scene, sel, wo).data.astype(np.float64)
            vals[hits.valid] = thru[hits.valid] * L
        film.splat_pass(vals)
    return film


def render_rhs(scene, field, camera, spp: int, M: int, seed: int = 0) -> Film:
    """Per first non-specular hit: E plus the M-sample scattering estimate
    (no gradient recording)."""
    film = Film(camera.width, camera.height)
    for s in range(spp):
        rng = _pass_rng(seed, s)
        hits, dirs, thru, _ = _first_nonspecular(scene, camera, rng)
        vals = np.zeros((len(hits), 3))
        if np.any(hits.valid):
            sel = hits.select(hits.valid)
            wo = -dirs[hits.valid]
            t_est = transport.estimate_scatter(
                scene, field, sel.position, sel.geo_normal, sel.sh_normal,
                sel.material_id, wo, M, rng).data.astype(np.float64)
            e = scene.emission_at_hits(sel, wo)
            vals[hits.valid] = thru[hits.valid] * (e + t_est)
        film.splat_pass(vals)
    return film


def render_residual(scene, field, camera, spp: int, M: int, seed: int = 0,
                    epsilon: float = 0.01) -> Film:
    """Per pixel |LHS - RHS| / ((LHS + RHS)/2 + eps), channelwise, from the
    converged LHS/RHS images."""
    lhs = render_lhs(scene, field, camera, spp, seed).image()
    rhs = render_rhs(scene, field, camera, spp, M, seed).image()
    m = 0.5 * (lhs + rhs)
    res = np.abs(lhs - rhs) / (m + epsilon)
    film = Film(camera.width, camera.height)
    film.splat_pass(res.reshape(-1, 3))
    return film


def path_trace(scene, camera, spp: int, max_depth: int = 32,
               seed: int = 0) -> Film:
    """Unidirectional path-tracing oracle with NEE + MIS and Russian
    roulette; unbiased for the supported BSDFs."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    film = Film(camera.width, camera.height)
    for s in range(spp):
        rng = _pass_rng(seed, s)
        jitter = rng.random((camera.width * camera.height, 2))
        o, d = camera.rays(jitter)
        hits = scene.intersect_batch(o, d)
        vals = transport.radiance_estimate(scene, hits, -d, rng,
                                           max_depth=max_depth)
        film.splat_pass(vals)
    return film


def mse(img: np.ndarray, ref: np.ndarray) -> float:
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise ValueError(f"image shape {img.shape} != reference {ref.shape}")
    return float(np.mean((img - ref) ** 2))


def mape(img: np.ndarray, ref: np.ndarray) -> float:
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise ValueError(f"image shape {img.shape} != reference {ref.shape}")
    return float(np.mean(np.abs(img - ref) / (ref + 0.01)))
