"""Quantitative acceptance gate.

Each test prints a single PASS/FAIL line (bypassing capture, so the lines
show up in a plain ``pytest -v`` run) and then asserts.  Several tests train
real models; the whole module takes on the order of two hours.  Everything
else in the suite is fast — run with ``--ignore=tests/test_acceptance.py``
while iterating.
"""
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import neuralgi.autodiff as ad
from neuralgi import render, scene_io, scenes, solver, transport
from neuralgi.autodiff import ParamStore, grad_check
from neuralgi.cli import main as cli_main
from neuralgi.field import EncoderConfig, RadianceField, build_sparse_grid


def report(num, ok, detail):
    line = f"[criterion {num:>2}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def furnace():
    return scenes.build(scenes.furnace_doc())


@pytest.fixture(scope="module")
def cornell():
    return scenes.build(scenes.cornell_doc())


def small_field(scene, variant="grid", seed=0, **kw):
    kw.setdefault("levels", 3)
    kw.setdefault("feat_dim", 8)
    enc = EncoderConfig(variant, levels=kw.pop("levels"),
                        feat_dim=kw.pop("feat_dim"))
    kw.setdefault("depth", 2)
    kw.setdefault("width", 32)
    return RadianceField(scene, enc, rng=np.random.default_rng(seed), **kw)


def eval_residual_loss(scene, field, seeds=(101, 202, 303, 404, 505),
                       n=2048, m=8):
    """Relative residual loss on frozen batches shared across runs.

    Per-step training losses are heavy-tailed and, in noisy-target mode,
    measure a different quantity entirely, so cross-run comparisons use
    this common metric instead.
    """
    vals = []
    for s in seeds:
        batch = solver.sample_batch(scene, n, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(scene, field, batch, m,
                                      np.random.default_rng(s + 1),
                                      tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals))


# ------------------------------------------------------------------ 1

def test_criterion_01_furnace_convergence(furnace):
    # uniform emission 0.5, albedo 0.5 -> equilibrium radiance exactly 1.0
    t0 = time.time()
    field = RadianceField(furnace, EncoderConfig("grid", levels=2,
                                                 feat_dim=4),
                          depth=2, width=16, rng=np.random.default_rng(0))
    cfg = solver.TrainConfig(n_lhs=128, m_incident=32, steps=5000,
                             seed=0).validate()
    solver.train(furnace, field, cfg)
    batch = solver.sample_batch(furnace, 1000, np.random.default_rng(42))
    L = field.radiance_L(furnace, batch.hits, batch.wo).data
    err = float(np.abs(L - 1.0).max())
    dt = time.time() - t0
    report(1, err < 0.02 and dt < 600,
           f"furnace max |L-1| = {err:.4f} (< 0.02) in {dt:.0f}s (< 600)")


# ------------------------------------------------------------------ 2

def test_criterion_02_gradients_match_finite_differences(furnace):
    t0 = time.time()
    field = RadianceField(furnace, EncoderConfig("grid", levels=2,
                                                 feat_dim=4),
                          depth=2, width=8, dtype=np.float64,
                          rng=np.random.default_rng(0))
    n_params = sum(field.params[n].data.size for n in field.params.names())
    batch = solver.sample_batch(furnace, 8, np.random.default_rng(0))

    # the loss normalizer is excluded from the gradient by construction;
    # freeze it at the unperturbed value so central differences probe the
    # same function the backward pass differentiates
    frozen = {}

    def loss_fn():
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(furnace, field, batch, 2,
                                      np.random.default_rng(1), tape=tape)
        if "m" not in frozen:
            frozen["m"] = 0.5 * (lhs.data + rhs.data)
        term = ad.square(tape, ad.div(tape, r,
                                      ad.Tensor(frozen["m"] + 0.01)))
        term = ad.mul(tape, term, ad.Tensor((1.0 / batch.pdf)[:, None]))
        return tape, ad.mean(tape, term)

    rep = grad_check(loss_fn, field.params, h=1e-5, subsample=25,
                     rng=np.random.default_rng(0))
    dt = time.time() - t0
    report(2, rep["max_rel_err"] < 1e-4 and n_params <= 1000 and dt < 60,
           f"max rel err {rep['max_rel_err']:.2e} (< 1e-4) over "
           f"{n_params} params in {dt:.0f}s (< 60)")


# ------------------------------------------------------------------ 3

def test_criterion_03_scatter_estimator_unbiased(furnace):
    field = RadianceField(furnace, EncoderConfig("grid", levels=2,
                                                 feat_dim=4),
                          depth=2, width=16, rng=np.random.default_rng(0))
    batch = solver.sample_batch(furnace, 1, np.random.default_rng(7))
    h, wo = batch.hits, batch.wo

    def scatter(M, n, rng):
        rep = dataclasses.replace(
            h, **{f.name: np.repeat(getattr(h, f.name), n, axis=0)
                  for f in dataclasses.fields(h)
                  if isinstance(getattr(h, f.name), np.ndarray)})
        return transport.estimate_scatter(
            furnace, field, rep.position, rep.geo_normal, rep.sh_normal,
            rep.material_id, np.repeat(wo, n, axis=0), M, rng).data

    rng = np.random.default_rng(11)
    ests = np.concatenate([scatter(1, 10000, rng) for _ in range(10)])
    refs = scatter(10000, 100, np.random.default_rng(12))
    mean, ref = ests.mean(axis=0), refs.mean(axis=0)
    sigma = np.sqrt(ests.var(axis=0, ddof=1) / len(ests)
                    + refs.var(axis=0, ddof=1) / len(refs))
    z = float((np.abs(mean - ref) / sigma).max())
    report(3, z < 3.0,
           f"1e5 M=1 estimates vs M=1e4 reference: max |z| = {z:.2f} (< 3)")


# ------------------------------------------------------------------ 4

def test_criterion_04_cornell_image_quality(tmp_path):
    doc = scenes.cornell_doc(image_size=32)
    scene = scenes.build(doc)
    camera = scene_io.camera_from_doc(doc)
    field = RadianceField(scene, EncoderConfig("grid"),
                          rng=np.random.default_rng(0))
    cfg = solver.TrainConfig(n_lhs=1024, m_incident=8, steps=20000,
                             seed=0).validate()
    solver.train(scene, field, cfg)

    gt = render.path_trace(scene, camera, spp=4096, max_depth=32,
                           seed=1).image()
    lhs = render.render_lhs(scene, field, camera, spp=16, seed=2).image()
    rhs = render.render_rhs(scene, field, camera, spp=16, M=8,
                            seed=3).image()
    mape_lhs = render.mape(lhs, gt)
    mape_rhs = render.mape(rhs, gt)
    report(4, mape_lhs < 0.15 and mape_rhs <= mape_lhs,
           f"LHS MAPE {mape_lhs:.4f} (< 0.15), RHS MAPE {mape_rhs:.4f} "
           f"(<= LHS)")


# ------------------------------------------------------------------ 5/6/7

TREND_STEPS = 1500


def trend_field(scene, variant, seed=0):
    # wide enough to actually fit the equilibrium; narrow MLPs destabilize
    # under the relative loss and bury the trends in noise
    return RadianceField(scene, EncoderConfig(variant, levels=5, feat_dim=8),
                         depth=2, width=128, rng=np.random.default_rng(seed))


def trend_train(scene, field, steps=TREND_STEPS, seed=0, mode="self_train",
                state=None, rng=None):
    cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=steps, seed=seed,
                             mode=mode, pt_max_depth=4).validate()
    return solver.train(scene, field, cfg, state=state, rng=rng)


@pytest.fixture(scope="module")
def trained_grid_field(cornell):
    field = trend_field(cornell, "grid")
    trend_train(cornell, field)
    return field, eval_residual_loss(cornell, field)


def test_criterion_05_self_training_beats_noisy_targets(
        cornell, trained_grid_field):
    _, loss_self = trained_grid_field
    noisy = trend_field(cornell, "grid")
    trend_train(cornell, noisy, mode="noisy_target")
    loss_noisy = eval_residual_loss(cornell, noisy)
    report(5, loss_self <= loss_noisy,
           f"equal-budget residual loss: self {loss_self:.4g} <= "
           f"noisy-target {loss_noisy:.4g}")


def test_criterion_06_encoder_ablation_ordering(cornell, trained_grid_field):
    _, loss_grid = trained_grid_field
    losses = {"grid": loss_grid}
    for variant in ("posenc", "none"):
        field = trend_field(cornell, variant)
        trend_train(cornell, field)
        losses[variant] = eval_residual_loss(cornell, field)
    ok = losses["grid"] <= losses["posenc"] <= losses["none"]
    report(6, ok,
           f"equal-step residual loss: grid {losses['grid']:.4g} <= "
           f"posenc {losses['posenc']:.4g} <= none {losses['none']:.4g}")


def test_criterion_07_finetuning_speedup(cornell, trained_grid_field):
    moved = scenes.build(scenes.cornell_doc(
        short_box_offset=(90.0, 0.0, 60.0)))
    scratch = trend_field(moved, "grid", seed=3)
    trend_train(moved, scratch)
    target = eval_residual_loss(moved, scratch)

    pretrained, _ = trained_grid_field
    pretrained.rebuild_grid(moved, np.random.default_rng(9))
    state = solver.TrainState(adam=ad.AdamState(pretrained.params, 5e-4))
    hit = None
    for milestone in range(150, TREND_STEPS // 2 + 1, 150):
        trend_train(moved, pretrained, steps=milestone, seed=9, state=state,
                    rng=np.random.default_rng((9, milestone)))
        if eval_residual_loss(moved, pretrained) <= target:
            hit = milestone
            break
    report(7, hit is not None and hit < TREND_STEPS // 2,
           f"fine-tune matched scratch loss {target:.4g} after "
           f"{hit} steps (< {TREND_STEPS // 2} = 0.5x scratch)")


# ------------------------------------------------------------------ 8

def test_criterion_08_sparse_grid_economics(furnace):
    grid = build_sparse_grid(furnace, levels=5, feat_dim=16,
                             rng=np.random.default_rng(0),
                             params=ParamStore())
    stats = grid.stats()
    dens = [st.density_percent for st in stats]
    strictly_down = all(a > b for a, b in zip(dens, dens[1:]))
    bytes_ok = all(st.feature_bytes == st.stored_vertices * 16 * 4
                   for st in stats)
    report(8, strictly_down and bytes_ok,
           f"density% {['%.2f' % d for d in dens]} strictly decreasing; "
           f"bytes == vertices*16*4: {bytes_ok}")


# ------------------------------------------------------------------ 9

def test_criterion_09_oracles(furnace):
    doc = scenes.furnace_doc(image_size=8)
    camera = scene_io.camera_from_doc(doc)
    img = render.path_trace(furnace, camera, spp=4096, max_depth=32,
                            seed=0).image()
    pt_err = float(np.abs(img - 1.0).max())

    from neuralgi.geometry import intersect_rays, intersect_rays_brute
    rng = np.random.default_rng(5)
    n = 1_000_000
    origins = rng.uniform(-2.0, 2.0, (n, 3))
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pb, tb = intersect_rays(furnace.bvh, furnace.v0, furnace.e1,
                            furnace.e2, origins, dirs, 1e-4, np.inf)
    pr, tr = intersect_rays_brute(furnace.v0, furnace.e1, furnace.e2,
                                  origins, dirs, 1e-4, np.inf)
    bvh_ok = np.array_equal(pb, pr) and np.array_equal(tb, tr)
    report(9, pt_err < 0.01 and bvh_ok,
           f"path tracer furnace max rel err {pt_err:.4f} (< 0.01); "
           f"BVH == brute force on 1e6 rays: {bvh_ok}")


# ------------------------------------------------------------------ 10

def test_criterion_10_determinism(tmp_path):
    args = ["--threads", "1", "train", "scenes/furnace.yaml", None,
            "--n", "16", "--m", "2", "--steps", "20", "--levels", "2",
            "--width", "8", "--depth", "2"]
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        argv = list(args)
        argv[4] = str(d)
        assert cli_main(argv) == 0
        outs.append(d)

    def strip_wall(path):
        # the wall_ms column is a timing measurement, not a computed
        # result; everything else must match bitwise
        lines = path.read_bytes().splitlines()
        return b"\n".join(b",".join(l.split(b",")[:-1]) for l in lines)

    csv_same = (strip_wall(outs[0] / "train_log.csv")
                == strip_wall(outs[1] / "train_log.csv"))

    pfms = []
    for tag in ("pa", "pb"):
        p = tmp_path / f"{tag}.pfm"
        assert cli_main(["--threads", "1", "render",
                         str(outs[0] / "final.nrad"), "scenes/furnace.yaml",
                         "--mode", "lhs", "--spp", "4",
                         "--out", str(p)]) == 0
        pfms.append(p.read_bytes())
    pfm_same = pfms[0] == pfms[1]
    report(10, csv_same and pfm_same,
           f"training CSV bitwise identical: {csv_same}; "
           f"rendered PFM bitwise identical: {pfm_same}")
