"""Light-transport estimators shared by the solver and the renderers:

- mirror-chain tracing (delta BSDFs are never queried from the field),
- the Monte Carlo estimate of the scattering operator T{L} with
  MIS-combined BSDF and emitter sampling,
- a unidirectional path-traced radiance estimate (NEE + MIS, Russian
  roulette) used as ground-truth oracle and as the noisy training target.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import materials
from .geometry import HitBatch
from .materials import bsdf_eval, bsdf_pdf, bsdf_sample, local_props

MAX_MIRROR_CHAIN = 16
RR_START_DEPTH = 5


def trace_to_nonspecular(scene, origins, dirs, max_chain=MAX_MIRROR_CHAIN):
    """Cast rays and follow perfect-mirror reflections until a non-specular
    surface (or escape). Returns (hits, final_dirs, throughput, went_specular).
    Chains deeper than max_chain contribute zero (valid=False)."""
    k = len(origins)
    cur_o = np.asarray(origins, dtype=np.float64)
    cur_d = np.asarray(dirs, dtype=np.float64)
    throughput = np.ones((k, 3))
    went_specular = np.zeros(k, dtype=bool)

    hits = scene.intersect_batch(cur_o, cur_d)
    final_d = cur_d.copy()
    for _ in range(max_chain):
        spec = hits.valid & (scene.mats.kind[hits.material_id]
                             == materials.KIND_MIRROR)
        if not np.any(spec):
            break
        went_specular |= spec
        wo = -final_d[spec]
        n = hits.sh_normal[spec]
        wi = materials.reflect(wo, n)
        throughput[spec] *= scene.mats.specular[hits.material_id[spec]]
        o = scene.offset_origins(hits.position[spec], hits.geo_normal[spec], wi)
        sub = scene.intersect_batch(o, wi)
        idx = np.flatnonzero(spec)
        hits.valid[idx] = sub.valid
        hits.position[idx] = sub.position
        hits.geo_normal[idx] = sub.geo_normal
        hits.sh_normal[idx] = sub.sh_normal
        hits.material_id[idx] = sub.material_id
        hits.triangle_id[idx] = sub.triangle_id
        hits.t[idx] = sub.t
        final_d[idx] = wi
    else:
        # chain still specular after max_chain bounces: drop it
        spec = hits.valid & (scene.mats.kind[hits.material_id]
                             == materials.KIND_MIRROR)
        hits.valid &= ~spec
    return hits, final_d, throughput, went_specular


def estimate_scatter(scene, field, x, geo_n, sh_n, mat_id, wo, M, rng,
                     tape=None, target_fn=None):
    """MC estimate of T{L}(x, wo) averaged over M MIS-combined samples.

    L at secondary hits is the field's radiance (network + emission) and
    stays differentiable when a tape is given. If target_fn is provided it
    replaces the field query (noisy-target training: a constant,
    path-traced incident radiance with no gradient flow).

    Returns a Tensor [N,3].
    """
    n = len(x)
    K = n * M
    rep = np.repeat(np.arange(n), M)
    x_r = x[rep]
    gn_r = geo_n[rep]
    sn_r = sh_n[rep]
    mat_r = mat_id[rep]
    wo_r = wo[rep]

    query_hits = []     # (HitBatch, dirs at hit, const weight rows [k,3], seg)

    # --- emitter-sampling strategy -----------------------------------
    if scene.em_table is not None:
        wi_e, pdf_e, y_hits = materials.sample_emitter_batch(
            scene, x_r, gn_r, rng)
        f_e = bsdf_eval(scene.mats, mat_r, sn_r, wi_e, wo_r)
        cos_e = np.maximum(0.0, np.einsum("ij,ij->i", wi_e, sn_r))
        pdf_b_at_e = bsdf_pdf(scene.mats, mat_r, sn_r, wi_e, wo_r)
        ok = y_hits.valid & (pdf_e > 0) & (cos_e > 0) & np.any(f_e > 0, axis=1)
        if np.any(ok):
            mis = pdf_e[ok] / (pdf_e[ok] + pdf_b_at_e[ok])
            w = f_e[ok] * (cos_e[ok] * mis / pdf_e[ok])[:, None]
            query_hits.append((y_hits.select(ok), wi_e[ok], w, rep[ok]))

    # --- BSDF-sampling strategy ---------------------------------------
    u = rng.random((K, 2))
    samp = bsdf_sample(scene.mats, mat_r, sn_r, wo_r, u[:, 0], u[:, 1])
    live = np.any(samp.weight > 0, axis=1)
    if np.any(live):
        o = scene.offset_origins(x_r[live], gn_r[live], samp.wi[live])
        z_hits, z_dirs, spec_w, went_spec = trace_to_nonspecular(
            scene, o, samp.wi[live])
        ok = z_hits.valid
        if np.any(ok):
            pdf_e_at_z = materials.emitter_pdf_solid_angle(
                scene, o, z_dirs, z_hits)
            pdf_b = samp.pdf[live]
            direct = ~(samp.is_delta[live] | went_spec)
            mis = np.where(direct, pdf_b / np.maximum(pdf_b + pdf_e_at_z,
                                                      1e-30), 1.0)
            w = samp.weight[live] * spec_w * mis[:, None]
            seg = rep[live]
            query_hits.append((z_hits.select(ok), z_dirs[ok], w[ok], seg[ok]))

    if not query_hits:
        return ad.Tensor(np.zeros((n, 3), dtype=field.dtype))

    all_hits = HitBatch(
        np.concatenate([h.valid for h, _, _, _ in query_hits]),
        np.concatenate([h.position for h, _, _, _ in query_hits]),
        np.concatenate([h.geo_normal for h, _, _, _ in query_hits]),
        np.concatenate([h.sh_normal for h, _, _, _ in query_hits]),
        np.concatenate([h.material_id for h, _, _, _ in query_hits]),
        np.concatenate([h.triangle_id for h, _, _, _ in query_hits]),
        np.concatenate([h.t for h, _, _, _ in query_hits]))
    all_dirs = np.concatenate([d for _, d, _, _ in query_hits])
    all_w = np.concatenate([w for _, _, w, _ in query_hits]).astype(field.dtype)
    all_seg = np.concatenate([s for _, _, _, s in query_hits])

    wo_at_hit = -all_dirs
    if target_fn is not None:
        L = ad.Tensor(np.asarray(target_fn(all_hits, wo_at_hit),
                                 dtype=field.dtype))
    else:
        props = local_props(scene, all_hits, wo_at_hit)
        n_val = field.forward_N(props, tape=tape)
        e_val = scene.emission_at_hits(all_hits, wo_at_hit).astype(field.dtype)
        L = ad.add(tape, n_val, e_val)

    weighted = ad.mul(tape, L, all_w)
    total = ad.segment_sum(tape, weighted, all_seg, n)
    return ad.mul(tape, total, np.asarray(1.0 / M, dtype=field.dtype))


def radiance_estimate(scene, hits: HitBatch, wo, rng, max_depth=32,
                      rr_start=RR_START_DEPTH):
    """One path-traced sample of outgoing radiance L(x, wo) per hit (NEE +
    balance-heuristic MIS, Russian roulette after rr_start bounces).
    Unbiased for the supported BSDFs; no network involved."""
    k = len(hits)
    L = np.zeros((k, 3))
    beta = np.ones((k, 3))
    active = hits.valid.copy()

    cur = hits
    cur_wo = np.asarray(wo, dtype=np.float64).copy()
    # first vertex emission is always counted in full
    L[active] += scene.emission_at_hits(cur, cur_wo)[active]

    idx = np.flatnonzero(active)
    cur = cur.select(active)
    cur_wo = cur_wo[active]
    beta_l = beta[active]

    for depth in range(max_depth):
        if len(idx) == 0:
            break
        mats_k = scene.mats.kind[cur.material_id]
        is_delta = mats_k == materials.KIND_MIRROR

        # next-event estimation at non-delta vertices
        if scene.em_table is not None and np.any(~is_delta):
            nd = ~is_delta
            wi_e, pdf_e, y_hits = materials.sample_emitter_batch(
                scene, cur.position[nd], cur.geo_normal[nd], rng)
            f = bsdf_eval(scene.mats, cur.material_id[nd], cur.sh_normal[nd],
                          wi_e, cur_wo[nd])
            cos = np.maximum(0.0, np.einsum("ij,ij->i", wi_e,
                                            cur.sh_normal[nd]))
            pdf_b = bsdf_pdf(scene.mats, cur.material_id[nd],
                             cur.sh_normal[nd], wi_e, cur_wo[nd])
            e_y = scene.emitted(y_hits.triangle_id, -wi_e)
            ok = y_hits.valid & (pdf_e > 0) & (cos > 0)
            contrib = np.zeros_like(f)
            mis = np.zeros(len(wi_e))
            mis[ok] = pdf_e[ok] / (pdf_e[ok] + pdf_b[ok])
            contrib[ok] = (f[ok] * e_y[ok]
                           * (cos[ok] * mis[ok] / pdf_e[ok])[:, None])
            L[idx[nd]] += beta_l[nd] * contrib

        # continue the path by BSDF sampling
        u = rng.random((len(idx), 2))
        samp = bsdf_sample(scene.mats, cur.material_id, cur.sh_normal,
                           cur_wo, u[:, 0], u[:, 1])
        beta_l = beta_l * samp.weight
        alive = np.any(beta_l > 0, axis=1)

        if depth + 1 >= rr_start:
            q = np.minimum(1.0, beta_l.max(axis=1))
            survive = rng.random(len(idx)) < q
            alive &= survive
            beta_l[alive] /= q[alive, None]

        if not np.any(alive):
            break
        idx = idx[alive]
        o = scene.offset_origins(cur.position[alive], cur.geo_normal[alive],
                                 samp.wi[alive])
        wi = samp.wi[alive]
        prev_delta = samp.is_delta[alive]
        prev_pdf = samp.pdf[alive]
        beta_l = beta_l[alive]

        nxt = scene.intersect_batch(o, wi)
        hit_ok = nxt.valid
        if not np.any(hit_ok):
            break

        # emission picked up by the BSDF ray, MIS-weighted against NEE
        e_z = scene.emitted(nxt.triangle_id, -wi) * hit_ok[:, None]
        has_e = np.any(e_z > 0, axis=1)
        if np.any(has_e):
            pdf_e_at_z = materials.emitter_pdf_solid_angle(scene, o, wi, nxt)
            w = np.where(prev_delta, 1.0,
                         prev_pdf / np.maximum(prev_pdf + pdf_e_at_z, 1e-30))
            L[idx] += beta_l * e_z * w[:, None]

        idx = idx[hit_ok]
        beta_l = beta_l[hit_ok]
        cur = nxt.select(hit_ok)
        cur_wo = -wi[hit_ok]

    return L
