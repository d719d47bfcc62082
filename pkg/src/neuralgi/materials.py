"""BSDF models (Lambertian, perfect mirror, normalized Phong), area-emitter
sampling, and assembly of the per-hit local-property record fed to the
network. All operations are vectorized over batches of shading points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_LAMBERT = 0
KIND_MIRROR = 1
KIND_PHONG = 2

_KIND_NAMES = {"lambertian": KIND_LAMBERT, "mirror": KIND_MIRROR,
               "phong": KIND_PHONG}


class MaterialError(Exception):
    pass


class MaterialTable:
    """Columnar storage for all scene materials, indexed by material id."""

    def __init__(self):
        self.names: list[str] = []
        self.kind = np.zeros(0, dtype=np.int64)
        self.diffuse = np.zeros((0, 3))
        self.specular = np.zeros((0, 3))
        self.exponent = np.zeros(0)
        self.roughness = np.zeros(0)

    def add(self, name: str, kind: str, diffuse=(0, 0, 0), specular=(0, 0, 0),
            exponent: float = 1.0) -> int:
        if kind not in _KIND_NAMES:
            raise MaterialError(f"unknown material type '{kind}'")
        diffuse = np.asarray(diffuse, dtype=np.float64)
        specular = np.asarray(specular, dtype=np.float64)
        for refl, label in ((diffuse, "diffuse"), (specular, "specular")):
            if np.any(refl < 0) or np.any(refl > 1):
                raise MaterialError(f"{label} reflectance of '{name}' outside [0,1]")
        k = _KIND_NAMES[kind]
        if k == KIND_PHONG and exponent < 1:
            raise MaterialError(f"phong exponent of '{name}' must be >= 1")
        rough = 1.0 / (1.0 + exponent) if k == KIND_PHONG else 0.0
        self.names.append(name)
        self.kind = np.append(self.kind, k)
        self.diffuse = np.vstack([self.diffuse, diffuse])
        self.specular = np.vstack([self.specular, specular])
        self.exponent = np.append(self.exponent, exponent)
        self.roughness = np.append(self.roughness, rough)
        return len(self.names) - 1

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MaterialError(f"undefined material '{name}'") from None

    def __len__(self):
        return len(self.names)


@dataclass
class DirSampleBatch:
    """BSDF direction samples. For delta lobes pdf is encoded as 1 and the
    throughput weight is the specular reflectance."""
    wi: np.ndarray        # [k,3]
    pdf: np.ndarray       # [k] per steradian
    weight: np.ndarray    # [k,3] f*cos/pdf
    is_delta: np.ndarray  # [k] bool


@dataclass
class LocalProps:
    """Network inputs per shading point: normalized position in [0,1]^3,
    unit direction/normal in [-1,1], reflectances, roughness in R^2."""
    position: np.ndarray   # [k,3]
    wo: np.ndarray         # [k,3]
    normal: np.ndarray     # [k,3]
    diffuse: np.ndarray    # [k,3]
    specular: np.ndarray   # [k,3]
    roughness: np.ndarray  # [k,2]

    def __len__(self):
        return len(self.position)


def reflect(w, n):
    """Mirror w about n (both unit, w on the n side)."""
    return 2.0 * np.einsum("ij,ij->i", w, n)[:, None] * n - w


def _dots(mats, mat_id, n, wi, wo):
    cos_i = np.einsum("ij,ij->i", wi, n)
    cos_o = np.einsum("ij,ij->i", wo, n)
    kind = mats.kind[mat_id]
    return cos_i, cos_o, kind


def bsdf_eval(mats: MaterialTable, mat_id, n, wi, wo) -> np.ndarray:
    """BSDF value without the cosine factor. Mirror lobes evaluate to 0."""
    cos_i, cos_o, kind = _dots(mats, mat_id, n, wi, wo)
    up = (cos_i > 0) & (cos_o > 0)
    out = np.zeros((len(cos_i), 3))

    lam = up & (kind == KIND_LAMBERT)
    out[lam] = mats.diffuse[mat_id[lam]] / np.pi

    ph = up & (kind == KIND_PHONG)
    if np.any(ph):
        e = mats.exponent[mat_id[ph]]
        r = reflect(wo[ph], n[ph])
        c = np.maximum(0.0, np.einsum("ij,ij->i", r, wi[ph]))
        lobe = (e + 2.0) / (2.0 * np.pi) * c ** e
        out[ph] = mats.specular[mat_id[ph]] * lobe[:, None]
    return out


def bsdf_pdf(mats: MaterialTable, mat_id, n, wi, wo) -> np.ndarray:
    """Solid-angle density matching bsdf_sample; 0 for delta lobes."""
    cos_i, cos_o, kind = _dots(mats, mat_id, n, wi, wo)
    up = (cos_i > 0) & (cos_o > 0)
    pdf = np.zeros(len(cos_i))

    lam = up & (kind == KIND_LAMBERT)
    pdf[lam] = cos_i[lam] / np.pi

    ph = up & (kind == KIND_PHONG)
    if np.any(ph):
        e = mats.exponent[mat_id[ph]]
        r = reflect(wo[ph], n[ph])
        c = np.maximum(0.0, np.einsum("ij,ij->i", r, wi[ph]))
        pdf[ph] = (e + 1.0) / (2.0 * np.pi) * c ** e
    return pdf


def bsdf_sample(mats: MaterialTable, mat_id, n, wo, u1, u2) -> DirSampleBatch:
    """Importance-sample each BSDF. Lambertian uses the cosine-weighted
    hemisphere so the weight is exactly the diffuse reflectance."""
    from .geometry import make_frame

    k = len(mat_id)
    kind = mats.kind[mat_id]
    cos_o = np.einsum("ij,ij->i", wo, n)
    wi = np.zeros((k, 3))
    pdf = np.zeros(k)
    weight = np.zeros((k, 3))
    is_delta = kind == KIND_MIRROR

    t, bt = make_frame(n)

    lam = kind == KIND_LAMBERT
    if np.any(lam):
        z = np.sqrt(u1[lam])
        r = np.sqrt(np.maximum(0.0, 1.0 - u1[lam]))
        phi = 2.0 * np.pi * u2[lam]
        local = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
        d = (local[:, 0:1] * t[lam] + local[:, 1:2] * bt[lam]
             + local[:, 2:3] * n[lam])
        wi[lam] = d
        pdf[lam] = z / np.pi
        ok = (cos_o[lam] > 0) & (z > 0)
        weight[lam] = mats.diffuse[mat_id[lam]] * ok[:, None]

    mir = is_delta
    if np.any(mir):
        wi[mir] = reflect(wo[mir], n[mir])
        pdf[mir] = 1.0
        ok = cos_o[mir] > 0
        weight[mir] = mats.specular[mat_id[mir]] * ok[:, None]

    ph = kind == KIND_PHONG
    if np.any(ph):
        e = mats.exponent[mat_id[ph]]
        axis = reflect(wo[ph], n[ph])
        ca = u1[ph] ** (1.0 / (e + 1.0))
        sa = np.sqrt(np.maximum(0.0, 1.0 - ca * ca))
        phi = 2.0 * np.pi * u2[ph]
        ta, bta = make_frame(axis)
        d = (sa * np.cos(phi))[:, None] * ta + (sa * np.sin(phi))[:, None] * bta \
            + ca[:, None] * axis
        wi[ph] = d
        p = (e + 1.0) / (2.0 * np.pi) * ca ** e
        pdf[ph] = p
        cos_i = np.einsum("ij,ij->i", d, n[ph])
        f = mats.specular[mat_id[ph]] * ((e + 2.0) / (2.0 * np.pi) * ca ** e)[:, None]
        ok = (cos_i > 0) & (cos_o[ph] > 0) & (p > 0)
        w = np.zeros_like(f)
        w[ok] = f[ok] * (cos_i[ok] / p[ok])[:, None]
        weight[ph] = w

    return DirSampleBatch(wi, pdf, weight, is_delta)


def emitter_pdf_solid_angle(scene, x, dir_to, hits) -> np.ndarray:
    """Density of sample_emitter for reaching `hits` from x along dir_to,
    converted to the solid-angle measure. 0 for non-emitting / back-facing
    hit points."""
    if scene.em_table is None:
        return np.zeros(len(x))
    tri = np.where(hits.valid, hits.triangle_id, 0)
    is_em = np.any(scene.emitted(tri, -np.asarray(dir_to)) > 0, axis=1)
    cos_y = np.abs(np.einsum("ij,ij->i", hits.geo_normal, dir_to))
    d2 = hits.t ** 2
    pdf = np.zeros(len(x))
    ok = hits.valid & is_em & (cos_y > 1e-9)
    pdf[ok] = d2[ok] / (scene.em_total_area * cos_y[ok])
    return pdf


def sample_emitter_batch(scene, x, geo_n, rng):
    """Next-event samples toward scene emitters from points x.

    Picks emitter triangles proportional to area, samples a point y on each,
    occlusion-tests the segment x->y, and returns (wi, pdf in solid angle,
    HitBatch at y). Entries that are occluded or back-facing get valid=False.
    """
    from . import geometry

    k = len(x)
    if scene.em_table is None:
        zero = np.zeros(k)
        empty = scene.hits_from_surface_samples(np.zeros(k, dtype=np.int64),
                                                np.zeros((k, 3)))
        empty.valid = np.zeros(k, dtype=bool)
        return np.zeros((k, 3)), zero, empty

    u = rng.random((k, 3))
    tri = scene.em_table.pick(u[:, 0])
    y = geometry.sample_triangle_points(scene.v0[tri], scene.v1[tri],
                                        scene.v2[tri], u[:, 1], u[:, 2])
    delta = y - x
    d2 = np.einsum("ij,ij->i", delta, delta)
    dist = np.sqrt(d2)
    ok = dist > 1e-9
    wi = np.where(ok[:, None], delta / np.maximum(dist, 1e-12)[:, None], 0.0)

    n_y = scene.geo_normal[tri]
    cos_y = -np.einsum("ij,ij->i", n_y, wi)
    front = (cos_y > 1e-9) | (scene.em_two_sided[tri] & (np.abs(cos_y) > 1e-9))
    ok &= front

    pdf = np.zeros(k)
    pdf[ok] = d2[ok] / (scene.em_total_area * np.abs(cos_y[ok]))

    # occlusion test over the open segment
    origins = scene.offset_origins(x, geo_n, wi)
    adj = np.linalg.norm(y - origins, axis=1)
    t_max = np.maximum(adj - scene.ray_eps, 0.0)
    shadowed = np.zeros(k, dtype=bool)
    if np.any(ok):
        shadowed[ok] = scene.occluded(origins[ok], wi[ok], t_max[ok])
    ok &= ~shadowed

    hits = scene.hits_from_surface_samples(tri, y)
    hits.valid = ok
    hits.t = dist
    return wi, pdf, hits


def local_props(scene, hits, wo) -> LocalProps:
    """Assemble the network-input record for a batch of hits."""
    mat = hits.material_id
    rough = scene.mats.roughness[mat]
    return LocalProps(
        position=scene.normalize_positions(hits.position),
        wo=np.asarray(wo, dtype=np.float64),
        normal=hits.sh_normal,
        diffuse=scene.mats.diffuse[mat],
        specular=scene.mats.specular[mat],
        roughness=np.stack([rough, rough], axis=1),
    )
