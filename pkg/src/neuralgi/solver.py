"""The residual-minimization solver: batch sampling over scene surfaces,
the reparameterized rendering-equation residual, the relative loss with a
stop-gradient normalizer, the minibatch SGD training loop, fine-tuning
after scene edits, and the noisy-target training baseline."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import autodiff as ad
from . import transport
from .autodiff import AdamState, Tensor, adam_step
from .geometry import HitBatch, sample_direction_uniform
from .materials import local_props

NORMALIZER_VARIANTS = ("mean", "lhs_only", "rhs_only", "none")
LOG_HEADER = ["step", "loss", "lr", "samples", "wall_ms"]


class SolverError(Exception):
    pass


@dataclass
class TrainConfig:
    n_lhs: int = 1024          # N: surface/direction samples per step
    m_incident: int = 8        # M: incident samples per LHS sample
    steps: int = 5000          # S
    lr: float = 5e-4
    lr_decay: float = 0.33     # applied at each third of training
    epsilon: float = 0.01      # loss-normalizer constant
    seed: int = 0
    precision: str = "f32"     # f32 | f64
    mode: str = "self_train"   # self_train | noisy_target
    normalizer: str = "mean"   # mean | lhs_only | rhs_only | none
    checkpoint_interval: int = 0   # 0 -> max(1, steps//10)
    pt_max_depth: int = 32     # noisy-target path length cap

    def validate(self):
        if self.n_lhs < 1 or self.m_incident < 1 or self.steps < 1:
            raise SolverError("N, M, S must all be >= 1")
        if self.epsilon <= 0:
            raise SolverError("normalizer epsilon must be positive")
        if self.mode not in ("self_train", "noisy_target"):
            raise SolverError(f"unknown mode '{self.mode}'")
        if self.normalizer not in NORMALIZER_VARIANTS:
            raise SolverError(f"unknown normalizer '{self.normalizer}'")
        if self.precision not in ("f32", "f64"):
            raise SolverError(f"unknown precision '{self.precision}'")
        return self

    @property
    def dtype(self):
        return np.float64 if self.precision == "f64" else np.float32


@dataclass
class BatchSamples:
    hits: HitBatch
    wo: np.ndarray        # [N,3]
    pdf_pos: np.ndarray   # [N] per m^2
    pdf_dir: np.ndarray   # [N] per sr

    @property
    def pdf(self):
        return self.pdf_pos * self.pdf_dir

    def __len__(self):
        return len(self.wo)


@dataclass
class TrainLogRecord:
    step: int
    loss: float
    lr: float
    samples: int
    wall_ms: float


@dataclass
class TrainState:
    step: int = 0
    adam: AdamState = None
    lr: float = 0.0
    log: list = dc_field(default_factory=list)


def learning_rate(config: TrainConfig, step: int) -> float:
    """Base rate decayed by lr_decay at each third of the run."""
    third = min(3 * step // config.steps, 2)
    return config.lr * config.lr_decay ** third


def sample_batch(scene, n: int, rng) -> BatchSamples:
    """Uniform surface points on non-specular surfaces plus uniform outgoing
    hemisphere directions around the shading normal."""
    if scene.area_train is None:
        raise SolverError("scene has only specular surfaces; nothing to train")
    hits, pdf_pos = scene.sample_surface(n, rng, table=scene.area_train)
    u = rng.random((n, 2))
    wo, pdf_dir = sample_direction_uniform(hits.sh_normal, False,
                                           u[:, 0], u[:, 1])
    return BatchSamples(hits, wo, pdf_pos, pdf_dir)


def residual(scene, field, batch: BatchSamples, M: int, rng, tape=None,
             mode: str = "self_train", max_depth: int = 32):
    """r = N(x,wo) - T{N + E}(x,wo), differentiable through both terms in
    self-training mode; the transported term is a constant path-traced
    target in noisy-target mode. Returns (r, lhs, rhs) tensors [N,3]."""
    hits = batch.hits
    props = local_props(scene, hits, batch.wo)
    n_lhs = field.forward_N(props, tape=tape)

    target_fn = None
    if mode == "noisy_target":
        def target_fn(sec_hits, sec_wo):
            return transport.radiance_estimate(scene, sec_hits, sec_wo, rng,
                                               max_depth=max_depth)
    t_est = transport.estimate_scatter(
        scene, field, hits.position, hits.geo_normal, hits.sh_normal,
        hits.material_id, batch.wo, M, rng, tape=tape, target_fn=target_fn)

    e_x = scene.emission_at_hits(hits, batch.wo).astype(field.dtype)
    r = ad.sub(tape, n_lhs, t_est)
    lhs = ad.add(tape, n_lhs, e_x)
    rhs = ad.add(tape, t_est, e_x)
    return r, lhs, rhs


def relative_loss(tape, r, lhs, rhs, pdf, epsilon: float,
                  normalizer: str = "mean"):
    """Mean over batch and channels of [r / (sg(m) + eps)]^2 / p(x,wo).
    The normalizer m never contributes to the gradient."""
    if epsilon <= 0:
        raise SolverError("epsilon must be positive")
    if normalizer == "mean":
        m = ad.mul(tape, ad.add(tape, lhs, rhs), np.asarray(0.5, r.dtype))
    elif normalizer == "lhs_only":
        m = lhs
    elif normalizer == "rhs_only":
        m = rhs
    elif normalizer == "none":
        m = ad.Tensor(np.zeros_like(r.data))
    else:
        raise SolverError(f"unknown normalizer '{normalizer}'")
    denom = ad.add(tape, ad.stop_gradient(tape, m),
                   np.asarray(epsilon, r.dtype))
    rel = ad.div(tape, r, denom)
    sq = ad.square(tape, rel)
    inv_p = (1.0 / np.asarray(pdf, dtype=r.dtype))[:, None]
    return ad.mean(tape, ad.mul(tape, sq, inv_p))


def train(scene, field, config: TrainConfig, log_path=None,
          checkpoint_fn=None, rng=None, state: TrainState = None,
          progress=None) -> TrainState:
    """Run Algorithm-1 minibatch SGD: sample a batch, estimate the residual,
    form the relative loss, backprop, Adam step. Aborts on non-finite loss
    with a diagnostic listing the offending sample indices."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if state is None:
        state = TrainState(adam=AdamState(field.params, config.lr))
    ckpt_every = config.checkpoint_interval or max(1, config.steps // 10)

    writer = None
    log_file = None
    if log_path is not None:
        log_file = open(log_path, "w", newline="")
        writer = csv.writer(log_file)
        writer.writerow(LOG_HEADER)

    t0 = time.perf_counter()
    try:
        for step in range(state.step, config.steps):
            lr = learning_rate(config, step)
            state.lr = lr
            state.adam.lr = lr

            batch = sample_batch(scene, config.n_lhs, rng)
            tape = ad.Tape()
            r, lhs, rhs = residual(scene, field, batch, config.m_incident,
                                   rng, tape=tape, mode=config.mode,
                                   max_depth=config.pt_max_depth)
            loss = relative_loss(tape, r, lhs, rhs, batch.pdf,
                                 config.epsilon, config.normalizer)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                bad = np.flatnonzero(~np.isfinite(r.data).all(axis=1))
                raise SolverError(
                    f"non-finite loss at step {step}; offending sample "
                    f"indices: {bad[:16].tolist()}")
            tape.backward(loss)
            adam_step(field.params, state.adam)
            state.step += 1

            wall_ms = (time.perf_counter() - t0) * 1000.0
            rec = TrainLogRecord(state.step, loss_val, lr,
                                 config.n_lhs * config.m_incident * state.step,
                                 wall_ms)
            state.log.append(rec)
            if writer is not None:
                writer.writerow([rec.step, repr(rec.loss), repr(rec.lr),
                                 rec.samples, f"{rec.wall_ms:.1f}"])
            if progress is not None:
                progress(rec)
            if checkpoint_fn is not None and (state.step % ckpt_every == 0
                                              or step == config.steps - 1):
                checkpoint_fn(field, state, rng)
    finally:
        if log_file is not None:
            log_file.close()
    return state


def finetune(scene_modified, field, config: TrainConfig, rng=None,
             **train_kwargs) -> TrainState:
    """Adapt a trained field to modified geometry: rebuild the sparse grid
    occupancy (features are carried over where vertex keys match, new keys
    start fresh) and resume training with fresh optimizer moments."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    field.rebuild_grid(scene_modified, rng)
    state = TrainState(adam=AdamState(field.params, config.lr))
    return train(scene_modified, field, config, rng=rng, state=state,
                 **train_kwargs)


def train_noisy_target(scene, field, config: TrainConfig,
                       **kwargs) -> TrainState:
    """Identical loop, but the scattering term is a fresh path-traced
    estimate treated as a constant target (no gradient flows through it)."""
    cfg = TrainConfig(**{**config.__dict__, "mode": "noisy_target"})
    return train(scene, field, cfg, **kwargs)


def smoothed_final_loss(state: TrainState, window: int = 100) -> float:
    vals = [r.loss for r in state.log[-window:]]
    return float(np.mean(vals)) if vals else float("nan")
