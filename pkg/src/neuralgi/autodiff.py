"""Minimal reverse-mode differentiation over dense numpy tensors.

Scope is deliberately small: exactly the operations needed by the radiance
field and its residual loss (affine layers, ReLU, elementwise arithmetic,
trilinear gather into sparse feature storage, stop-gradient, reductions,
segment sums) plus an Adam optimizer and a finite-difference checker.
No general graph optimization, no higher-order derivatives.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A dense array tracked by a Tape. grad is lazily allocated."""

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class ParamStore:
    """Named parameter tensors with their gradient accumulators."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data, dtype=None) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.array(data, dtype=dtype))
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def zero_grads(self):
        for t in self._params.values():
            t.zero_grad()

    def num_values(self):
        return sum(t.data.size for t in self._params.values())


class Tape:
    """Append-only record of operations; backward replays it in reverse."""

    def __init__(self):
        self._backwards = []

    def record(self, fn):
        self._backwards.append(fn)

    def backward(self, loss: Tensor):
        if loss.data.size != 1:
            raise ValueError("backward expects a scalar loss")
        if not np.all(np.isfinite(loss.data)):
            raise FloatingPointError("non-finite loss value")
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._backwards):
            fn()

    def __len__(self):
        return len(self._backwards)


def _data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _unbroadcast(g, shape):
    """Sum gradient g down to `shape` (undo numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def affine(tape: Tape, x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    xd, Wd, bd = _data(x), _data(W), _data(b)
    if xd.shape[-1] != Wd.shape[0]:
        raise ValueError(f"affine shape mismatch: x {xd.shape} vs W {Wd.shape}")
    out = Tensor(xd @ Wd + bd)
    if tape is not None:
        def back():
            g = out.grad
            if g is None:
                return
            if isinstance(x, Tensor):
                x.accumulate(g @ Wd.T)
            if isinstance(W, Tensor):
                W.accumulate(xd.T @ g)
            if isinstance(b, Tensor):
                b.accumulate(g.sum(axis=0))
        tape.record(back)
    return out


def relu(tape: Tape, x: Tensor) -> Tensor:
    xd = _data(x)
    out = Tensor(np.maximum(xd, 0))
    if tape is not None and isinstance(x, Tensor):
        mask = xd > 0
        def back():
            if out.grad is not None:
                x.accumulate(out.grad * mask)
        tape.record(back)
    return out


def _elementwise(tape, a, b, fwd, back_a, back_b):
    ad, bd = _data(a), _data(b)
    out = Tensor(fwd(ad, bd))
    if tape is not None:
        def back():
            g = out.grad
            if g is None:
                return
            if isinstance(a, Tensor):
                a.accumulate(_unbroadcast(back_a(g, ad, bd), ad.shape))
            if isinstance(b, Tensor):
                b.accumulate(_unbroadcast(back_b(g, ad, bd), bd.shape))
        tape.record(back)
    return out


def add(tape, a, b):
    return _elementwise(tape, a, b, lambda x, y: x + y,
                        lambda g, x, y: g, lambda g, x, y: g)


def sub(tape, a, b):
    return _elementwise(tape, a, b, lambda x, y: x - y,
                        lambda g, x, y: g, lambda g, x, y: -g)


def mul(tape, a, b):
    return _elementwise(tape, a, b, lambda x, y: x * y,
                        lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(tape, a, b):
    return _elementwise(tape, a, b, lambda x, y: x / y,
                        lambda g, x, y: g / y,
                        lambda g, x, y: -g * x / (y * y))


def square(tape, x):
    xd = _data(x)
    out = Tensor(xd * xd)
    if tape is not None and isinstance(x, Tensor):
        def back():
            if out.grad is not None:
                x.accumulate(2.0 * xd * out.grad)
        tape.record(back)
    return out


def mean(tape, x):
    xd = _data(x)
    out = Tensor(np.asarray(xd.mean()))
    if tape is not None and isinstance(x, Tensor):
        inv = 1.0 / xd.size
        def back():
            if out.grad is not None:
                x.accumulate(np.full_like(xd, out.grad * inv))
        tape.record(back)
    return out


def concat(tape, parts, axis=1):
    datas = [_data(p) for p in parts]
    out = Tensor(np.concatenate(datas, axis=axis))
    if tape is not None:
        sizes = [d.shape[axis] for d in datas]
        offsets = np.cumsum([0] + sizes)
        def back():
            g = out.grad
            if g is None:
                return
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if isinstance(p, Tensor):
                    sl = [slice(None)] * g.ndim
                    sl[axis] = slice(lo, hi)
                    p.accumulate(g[tuple(sl)])
        tape.record(back)
    return out


def stop_gradient(tape, x) -> Tensor:
    """Forward identity; contributes exactly zero to upstream gradients."""
    return Tensor(_data(x).copy())


def segment_sum(tape, x, seg_ids, num_segments: int) -> Tensor:
    """Sum rows of x into num_segments buckets given per-row segment ids."""
    xd = _data(x)
    out_data = np.zeros((num_segments,) + xd.shape[1:], dtype=xd.dtype)
    np.add.at(out_data, seg_ids, xd)
    out = Tensor(out_data)
    if tape is not None and isinstance(x, Tensor):
        def back():
            if out.grad is not None:
                x.accumulate(out.grad[seg_ids])
        tape.record(back)
    return out


def trilinear_gather(tape, features: Tensor, corner_idx, corner_w) -> Tensor:
    """Weighted gather of 8 corner feature vectors per query point.

    corner_idx: [Q,8] int rows into the feature array, -1 for a corner
    missing from sparse storage (treated as a zero feature, no gradient).
    corner_w: [Q,8] trilinear weights. Backward scatters grad*weight into
    the corner feature gradients via np.add.at, conserving gradient mass.
    """
    F = _data(features)
    idx = np.asarray(corner_idx)
    w = np.asarray(corner_w, dtype=F.dtype)
    valid = idx >= 0
    safe = np.where(valid, idx, 0)
    corners = F[safe]                       # [Q,8,l]
    corners = corners * valid[:, :, None]
    out = Tensor(np.einsum("qk,qkl->ql", w, corners))
    if tape is not None and isinstance(features, Tensor):
        def back():
            g = out.grad                    # [Q,l]
            if g is None:
                return
            contrib = g[:, None, :] * w[:, :, None]   # [Q,8,l]
            if features.grad is None:
                features.grad = np.zeros_like(F)
            np.add.at(features.grad, safe[valid], contrib[valid])
        tape.record(back)
    return out


class AdamState:
    """Standard Adam with bias correction; gradients zeroed after each step."""

    def __init__(self, params: ParamStore, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        # moments kept in float64: squared f32 gradients can overflow to
        # inf, which would poison v (and freeze the parameter) permanently
        self.m = {k: np.zeros(t.data.shape) for k, t in params.items()}
        self.v = {k: np.zeros(t.data.shape) for k, t in params.items()}


def adam_step(params: ParamStore, state: AdamState):
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        g = g.astype(np.float64)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= (state.lr * m_hat
                   / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)
    params.zero_grads()


def grad_check(loss_fn, params: ParamStore, h: float = 1e-5,
               subsample: int = 20, rng=None):
    """Compare recorded gradients against central finite differences.

    loss_fn must build a fresh tape and return (tape, loss_tensor); it has
    to be deterministic across calls (freeze any RNG it uses). Up to
    `subsample` coordinates per parameter are probed. Returns a report dict
    with the max relative error and per-parameter details.
    """
    if rng is None:
        rng = np.random.default_rng(0)

    params.zero_grads()
    tape, loss = loss_fn()
    tape.backward(loss)
    analytic = {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for k, t in params.items()}
    params.zero_grads()

    report = {"max_rel_err": 0.0, "per_param": {}}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        coords = rng.choice(n, size=min(subsample, n), replace=False)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            _, lp = loss_fn()
            flat[c] = orig - h
            _, lm = loss_fn()
            flat[c] = orig
            fd = (float(lp.data) - float(lm.data)) / (2 * h)
            an = float(analytic[name].reshape(-1)[c])
            denom = max(abs(fd), abs(an), 1e-8)
            rel = abs(fd - an) / denom
            worst = max(worst, rel)
        report["per_param"][name] = worst
        report["max_rel_err"] = max(report["max_rel_err"], worst)
    return report
