import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import neuralgi.autodiff as ad
from neuralgi.autodiff import (AdamState, ParamStore, Tape, Tensor,
                               adam_step, grad_check)


def test_param_store_basics():
    ps = ParamStore()
    w = ps.add("w", np.ones((2, 3)))
    assert ps.num_values() == 6
    assert "w" in ps
    with pytest.raises(ValueError):
        ps.add("w", np.zeros(1))
    w.accumulate(np.full((2, 3), 2.0))
    ps.zero_grads()
    assert w.grad is None


def test_backward_requires_finite_scalar():
    t = Tape()
    with pytest.raises(ValueError):
        t.backward(Tensor(np.zeros(3)))
    with pytest.raises(FloatingPointError):
        t.backward(Tensor(np.array(np.nan)))


def test_affine_gradients_finite_difference():
    rng = np.random.default_rng(0)
    ps = ParamStore()
    W = ps.add("W", rng.normal(size=(4, 3)))
    b = ps.add("b", rng.normal(size=3))
    x = rng.normal(size=(5, 4))

    def loss_fn():
        tape = Tape()
        y = ad.affine(tape, x, W, b)
        return tape, ad.mean(tape, ad.square(tape, y))

    rep = grad_check(loss_fn, ps, subsample=50)
    assert rep["max_rel_err"] < 1e-6


def test_composite_graph_finite_difference():
    # exercise relu, add/sub/mul/div, square, concat, mean in one graph
    rng = np.random.default_rng(1)
    ps = ParamStore()
    a = ps.add("a", rng.normal(size=(6, 4)))
    b = ps.add("b", rng.normal(size=(6, 4)) + 3.0)  # keep denominator off 0

    def loss_fn():
        tape = Tape()
        h = ad.relu(tape, a)
        g = ad.div(tape, ad.mul(tape, h, a), b)
        cat = ad.concat(tape, [g, ad.sub(tape, a, b)], axis=1)
        return tape, ad.mean(tape, ad.square(tape, cat))

    rep = grad_check(loss_fn, ps, subsample=24)
    assert rep["max_rel_err"] < 1e-6


def test_stop_gradient_blocks_flow():
    # oracle: gradient equals that of the same graph with the stopped
    # branch replaced by a frozen constant
    rng = np.random.default_rng(2)
    ps = ParamStore()
    a = ps.add("a", rng.normal(size=(5, 3)))
    frozen = a.data.copy() * 2.0

    tape = Tape()
    y = ad.mul(tape, a, ad.stop_gradient(tape, ad.mul(tape, a, 2.0)))
    loss = ad.mean(tape, y)
    tape.backward(loss)
    g_stopped = a.grad.copy()
    ps.zero_grads()

    tape = Tape()
    loss2 = ad.mean(tape, ad.mul(tape, a, frozen))
    tape.backward(loss2)
    np.testing.assert_allclose(g_stopped, a.grad, atol=1e-12)


def test_segment_sum_forward_and_grad():
    x = Tensor(np.arange(12, dtype=np.float64).reshape(4, 3))
    seg = np.array([0, 1, 0, 2])
    tape = Tape()
    out = ad.segment_sum(tape, x, seg, 3)
    np.testing.assert_array_equal(out.data[0], x.data[0] + x.data[2])
    np.testing.assert_array_equal(out.data[1], x.data[1])
    np.testing.assert_array_equal(out.data[2], x.data[3])
    loss = ad.mean(tape, ad.square(tape, out))
    tape.backward(loss)
    # grad routes each row's contribution back to its source row
    expected = 2 * out.data[seg] / out.data.size
    np.testing.assert_allclose(x.grad, expected)


def test_trilinear_gather_missing_corner_zero():
    feats = Tensor(np.array([[1.0, 10.0], [2.0, 20.0]]))
    idx = np.array([[0, 1, -1, -1, -1, -1, -1, -1]])
    w = np.array([[0.25, 0.5, 0.25, 0, 0, 0, 0, 0]])
    tape = Tape()
    out = ad.trilinear_gather(tape, feats, idx, w)
    # missing corner contributes zero despite nonzero weight
    np.testing.assert_allclose(out.data, [[0.25 * 1 + 0.5 * 2,
                                           0.25 * 10 + 0.5 * 20]])
    loss = ad.mean(tape, out)
    tape.backward(loss)
    np.testing.assert_allclose(feats.grad, [[0.25 / 2, 0.25 / 2],
                                            [0.5 / 2, 0.5 / 2]])


def test_trilinear_gather_finite_difference():
    rng = np.random.default_rng(3)
    ps = ParamStore()
    feats = ps.add("f", rng.normal(size=(9, 4)))
    idx = rng.integers(0, 9, size=(6, 8))
    idx[0, 3] = -1
    w = rng.random((6, 8))
    w /= w.sum(axis=1, keepdims=True)

    def loss_fn():
        tape = Tape()
        out = ad.trilinear_gather(tape, feats, idx, w)
        return tape, ad.mean(tape, ad.square(tape, out))

    rep = grad_check(loss_fn, ps, subsample=36)
    assert rep["max_rel_err"] < 1e-6


def test_broadcasting_gradients():
    ps = ParamStore()
    rng = np.random.default_rng(4)
    bias = ps.add("bias", rng.normal(size=(1, 3)))
    x = rng.normal(size=(7, 3))

    def loss_fn():
        tape = Tape()
        return tape, ad.mean(tape, ad.square(tape, ad.add(tape, x, bias)))

    rep = grad_check(loss_fn, ps, subsample=3)
    assert rep["max_rel_err"] < 1e-6


@settings(deadline=None, max_examples=30)
@given(arrays(np.float64, (3, 2), elements=st.floats(-5, 5)))
def test_relu_grad_zero_at_nonpositive(xdata):
    ps = ParamStore()
    x = ps.add("x", xdata)
    tape = Tape()
    y = ad.relu(tape, x)
    tape.backward(ad.mean(tape, y))
    g = x.grad if x.grad is not None else np.zeros_like(xdata)
    assert (g[xdata <= 0] == 0).all()
    np.testing.assert_allclose(g[xdata > 0], 1.0 / xdata.size)
    ps.zero_grads()


def test_adam_matches_reference_implementation():
    # oracle: straight transcription of the published update rule
    rng = np.random.default_rng(5)
    ps = ParamStore()
    p = ps.add("p", rng.normal(size=4))
    ref = p.data.copy()
    m = np.zeros(4)
    v = np.zeros(4)
    lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
    st8 = AdamState(ps, lr=lr)
    for t in range(1, 6):
        g = rng.normal(size=4)
        p.grad = g.copy()
        adam_step(ps, st8)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        ref -= lr * mh / (np.sqrt(vh) + eps)
        np.testing.assert_allclose(p.data, ref, atol=1e-12)
    assert p.grad is None  # cleared after each step


def test_adam_first_step_is_lr_sized():
    # bias correction makes the very first update ~= lr * sign(grad)
    ps = ParamStore()
    p = ps.add("p", np.zeros(3))
    st8 = AdamState(ps, lr=0.1)
    p.grad = np.array([1e-3, -4.0, 7.0])
    adam_step(ps, st8)
    np.testing.assert_allclose(np.abs(p.data), 0.1, rtol=1e-4)
