import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from sfagc.autodiff import (
    Adam,
    AdamState,
    Linear,
    Tensor,
    adam_step,
    backward,
    broadcast_to,
    concat,
    cosine_similarity,
    dropout,
    finite_diff_grad,
    leaky_relu,
    log_softmax,
    matmul,
    softmax,
    take_rows,
    trace,
    uniform_init,
)
from sfagc.errors import InvalidArgument, ShapeError


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# forward values


def test_matmul_hand_product():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    b = Tensor([[5.0], [6.0]])
    assert_allclose(matmul(a, b).data, [[17.0], [39.0]])


def test_matmul_identity_and_zero():
    a = Tensor(rng().normal(size=(4, 4)))
    assert_allclose(matmul(a, Tensor(np.eye(4))).data, a.data)
    assert_allclose(matmul(a, Tensor(np.zeros((4, 3)))).data, np.zeros((4, 3)))


def test_matmul_batched_matches_loop():
    r = rng(1)
    a = Tensor(r.normal(size=(5, 3, 4)))
    w = Tensor(r.normal(size=(4, 2)))
    out = matmul(a, w).data
    for i in range(5):
        assert_allclose(out[i], a.data[i] @ w.data, rtol=1e-12)


def test_matmul_shape_errors():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2, 2))))


def test_elementwise_identities():
    r = rng(2)
    x = Tensor(r.normal(size=(3, 4)))
    assert_allclose((x + Tensor(np.zeros((3, 4)))).data, x.data)
    assert_allclose((x * Tensor(np.ones((3, 4)))).data, x.data)
    assert_allclose((x - x).data, np.zeros((3, 4)))
    assert_allclose((x / Tensor(np.ones((3, 4)))).data, x.data)


def test_elementwise_broadcasting_matches_numpy():
    r = rng(3)
    a = Tensor(r.normal(size=(4, 5, 3)))
    b = Tensor(r.normal(size=(5, 1)))
    assert_allclose((a + b).data, a.data + b.data)
    assert_allclose((a * b).data, a.data * b.data)


def test_elementwise_shape_error():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((2, 4)))


def test_leaky_relu_values():
    x = Tensor([-2.0, -0.5, 0.0, 0.5, 2.0])
    assert_allclose(leaky_relu(x, 0.2).data, [-0.4, -0.1, 0.0, 0.5, 2.0])
    assert_allclose(leaky_relu(x, 0.0).data, [0.0, 0.0, 0.0, 0.5, 2.0])


def test_softmax_closed_form():
    # exp(0) : exp(ln 3) = 1 : 3
    out = softmax(Tensor([0.0, math.log(3.0)]))
    assert_allclose(out.data, [0.25, 0.75], atol=1e-12)


def test_softmax_constant_rows_uniform():
    out = softmax(Tensor(np.full((3, 5), 7.0)), axis=1)
    assert_allclose(out.data, np.full((3, 5), 0.2), atol=1e-15)


def test_softmax_single_element_is_one():
    assert_allclose(softmax(Tensor([42.0])).data, [1.0])


def test_softmax_scale_flattens():
    x = Tensor([0.0, 1.0, 2.0])
    sharp = softmax(x, scale=0.1).data
    flat = softmax(x, scale=10.0).data
    assert sharp.max() > flat.max()
    assert_allclose(softmax(x, scale=2.0).data, softmax(Tensor(x.data / 2.0)).data)


def test_softmax_extreme_logits_stable():
    out = softmax(Tensor([1000.0, 0.0, -1000.0]))
    assert_allclose(out.data.sum(), 1.0)
    assert out.data[0] == pytest.approx(1.0)


def test_softmax_errors():
    with pytest.raises(InvalidArgument):
        softmax(Tensor(np.empty((0,))))
    with pytest.raises(InvalidArgument):
        softmax(Tensor([1.0, 2.0]), scale=0.0)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=12),
    st.floats(min_value=-20, max_value=20),
)
def test_softmax_simplex_and_shift_invariance(vals, shift):
    x = np.asarray(vals)
    p = softmax(Tensor(x)).data
    assert (p >= 0.0).all()
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    q = softmax(Tensor(x + shift)).data
    assert_allclose(p, q, atol=1e-12)


def test_log_softmax_matches_log_of_softmax():
    x = Tensor(rng(4).normal(size=(3, 6)))
    assert_allclose(log_softmax(x, axis=1).data, np.log(softmax(x, axis=1).data), atol=1e-12)


def test_concat_values_and_errors():
    a, b = Tensor(np.ones((2, 3))), Tensor(np.zeros((2, 2)))
    out = concat([a, b], axis=1)
    assert out.shape == (2, 5)
    assert_allclose(out.data[:, :3], 1.0)
    assert_allclose(out.data[:, 3:], 0.0)
    with pytest.raises(ShapeError):
        concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3)))], axis=1)
    with pytest.raises(InvalidArgument):
        concat([], axis=0)


def test_take_rows_gather_and_errors():
    x = Tensor(np.arange(12.0).reshape(4, 3))
    idx = np.array([[0, 3], [1, 1]])
    out = take_rows(x, idx)
    assert out.shape == (2, 2, 3)
    assert_allclose(out.data[0, 1], [9.0, 10.0, 11.0])
    with pytest.raises(InvalidArgument):
        take_rows(x, np.array([4]))
    with pytest.raises(InvalidArgument):
        take_rows(x, np.array([0.5]))


def test_cosine_similarity_values():
    a = Tensor([[1.0, 0.0], [1.0, 1.0], [-2.0, 0.0]])
    b = Tensor([[2.0, 0.0], [1.0, 1.0], [1.0, 0.0]])
    assert_allclose(cosine_similarity(a, b).data, [1.0, 1.0, -1.0], atol=1e-12)


def test_cosine_similarity_orthogonal_and_degenerate():
    a = Tensor([[1.0, 0.0], [0.0, 0.0]])
    b = Tensor([[0.0, 5.0], [1.0, 1.0]])
    assert_allclose(cosine_similarity(a, b).data, [0.0, 0.0], atol=1e-15)


def test_cosine_similarity_scale_invariance():
    r = rng(5)
    a = r.normal(size=(10, 4))
    b = r.normal(size=(10, 4))
    c1 = cosine_similarity(Tensor(a), Tensor(b)).data
    c2 = cosine_similarity(Tensor(3.7 * a), Tensor(0.2 * b)).data
    assert_allclose(c1, c2, atol=1e-12)


def test_reduction_values():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    assert x.sum().item() == 15.0
    assert_allclose(x.sum(axis=0).data, [3.0, 5.0, 7.0])
    assert_allclose(x.mean(axis=1).data, [1.0, 4.0])
    assert_allclose(x.max(axis=1).data, [2.0, 5.0])


def test_nonfinite_rejected():
    with pytest.raises(InvalidArgument):
        Tensor([1.0, np.nan])
    with pytest.raises(InvalidArgument):
        Tensor([1.0, 0.0]) / Tensor([1.0, 0.0])


# ---------------------------------------------------------------------------
# gradients against finite differences


def _fd_check(build, theta, rtol=1e-6, atol=1e-8):
    """Compare backward() gradients on theta against central differences."""
    loss = build(theta)
    backward(loss, params=[theta])
    num = finite_diff_grad(lambda t: build(t), theta)
    assert_allclose(theta.grad, num, rtol=rtol, atol=atol)


def test_backward_linear_map_gradient():
    r = rng(6)
    x = Tensor(r.normal(size=(5, 3)))
    w = Tensor(r.normal(size=(3, 2)), requires_grad=True)
    _fd_check(lambda t: matmul(x, t).sum(), w)
    # d(sum(x @ w))/dw[i, j] = sum_n x[n, i], independent of j
    assert_allclose(w.grad, np.tile(x.data.sum(axis=0)[:, None], (1, 2)), atol=1e-12)


def test_backward_quadratic_gradient_is_param():
    w = Tensor(rng(7).normal(size=(4, 3)), requires_grad=True)
    loss = (w * w).sum() * 0.5
    backward(loss)
    assert_allclose(w.grad, w.data, atol=1e-12)


OPS = {
    "matmul_left": lambda t: matmul(t, Tensor(rng(40).normal(size=(t.shape[-1], 3)))).sum(),
    "matmul_right": lambda t: matmul(Tensor(rng(41).normal(size=(6, t.shape[0]))), t).sum(),
    "add_bcast": lambda t: (t + Tensor(rng(42).normal(size=(t.shape[-1],)))).sum(),
    "sub": lambda t: (Tensor(rng(43).normal(size=t.shape)) - t).sum(),
    "mul_bcast": lambda t: (t * Tensor(rng(44).normal(size=(t.shape[0], 1)))).sum(),
    "div": lambda t: (t / Tensor(2.0 + rng(45).random(t.shape))).sum(),
    "rdiv": lambda t: (Tensor(rng(46).normal(size=t.shape)) / (t * t + 1.0)).sum(),
    "leaky": lambda t: leaky_relu(t, 0.2).sum(),
    "abs": lambda t: t.abs().sum(),
    "sqrt": lambda t: (t * t + 1.0).sqrt().sum(),
    "sum_axis": lambda t: (t.sum(axis=1) * Tensor(rng(47).normal(size=(t.shape[0],)))).sum(),
    "mean": lambda t: t.mean(),
    "max": lambda t: t.max(axis=1).sum(),
    "reshape": lambda t: (t.reshape(t.size) * Tensor(rng(48).normal(size=(t.size,)))).sum(),
    "softmax": lambda t: (softmax(t, axis=1) * Tensor(rng(49).normal(size=t.shape))).sum(),
    "softmax_scaled": lambda t: (softmax(t, axis=1, scale=2.5) * Tensor(rng(50).normal(size=t.shape))).sum(),
    "log_softmax": lambda t: (log_softmax(t, axis=1) * Tensor(rng(51).normal(size=t.shape))).sum(),
    "concat": lambda t: concat([t, t * 2.0, Tensor(np.ones(t.shape))], axis=1).sum(),
    "take_repeated": lambda t: take_rows(t, np.array([0, 1, 1, 3, 3, 3])).sum(),
    "broadcast": lambda t: (broadcast_to(t.reshape(t.shape[0], 1, t.shape[1]), (t.shape[0], 4, t.shape[1])) * Tensor(rng(52).normal(size=(t.shape[0], 4, t.shape[1])))).sum(),
    "cosine_a": lambda t: cosine_similarity(t, Tensor(rng(53).normal(size=t.shape)), axis=1).sum(),
    "cosine_b": lambda t: cosine_similarity(Tensor(rng(54).normal(size=t.shape)), t, axis=1).sum(),
    "chain": lambda t: leaky_relu(matmul(t, Tensor(rng(55).normal(size=(t.shape[-1], 4)))), 0.2).max(axis=1).mean(),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_match_finite_differences(name):
    theta = Tensor(rng(hash(name) % 2**32).normal(size=(4, 5)), requires_grad=True)
    # keep abs/max/leaky away from their kink points
    theta.data[np.abs(theta.data) < 1e-3] += 0.01
    _fd_check(OPS[name], theta, rtol=1e-5, atol=1e-7)


def test_dropout_gradient_uses_same_mask():
    x = Tensor(rng(8).normal(size=(50,)), requires_grad=True)
    out = dropout(x, 0.4, np.random.default_rng(123))
    mask = (out.data != 0.0).astype(float)
    backward(out.sum())
    assert_allclose(x.grad, mask / 0.6, atol=1e-12)


def test_dropout_rate_zero_is_identity():
    x = Tensor(rng(9).normal(size=(10,)))
    assert dropout(x, 0.0, np.random.default_rng(0)) is x
    with pytest.raises(InvalidArgument):
        dropout(x, 1.0, np.random.default_rng(0))


def test_backward_requires_scalar_loss():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(x + 1.0)


def test_backward_unreached_param_zero():
    used = Tensor(np.ones(3), requires_grad=True)
    unused = Tensor(np.ones(2), requires_grad=True)
    backward((used * 2.0).sum(), params=[used, unused])
    assert_allclose(used.grad, 2.0 * np.ones(3))
    assert_allclose(unused.grad, np.zeros(2))


def test_backward_accumulate_adds():
    w = Tensor(np.ones(3), requires_grad=True)
    backward((w * 1.0).sum(), params=[w], accumulate=True)
    backward((w * 2.0).sum(), params=[w], accumulate=True)
    assert_allclose(w.grad, 3.0 * np.ones(3))


def test_backward_diamond_reuse():
    # x feeds two branches that rejoin: gradients must add
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * 3.0 + x * x
    backward(y.sum())
    assert_allclose(x.grad, [3.0 + 2.0 * 2.0])


def test_trace_is_topological():
    r = rng(10)
    w = Tensor(r.normal(size=(3, 3)), requires_grad=True)
    x = Tensor(r.normal(size=(2, 3)))
    h = leaky_relu(matmul(x, w))
    loss = (softmax(h, axis=1) * h).sum()
    order = trace(loss)
    pos = {id(node): i for i, node in enumerate(order)}
    for i, node in enumerate(order):
        for p in node.parents:
            if p.node is not None:
                assert pos[id(p.node)] < i
    assert order[-1] is loss.node


# ---------------------------------------------------------------------------
# finite differences and optimizer


def test_finite_diff_on_sum_is_ones():
    theta = Tensor(rng(11).normal(size=(3, 2)))
    g = finite_diff_grad(lambda t: t.sum(), theta)
    assert_allclose(g, np.ones((3, 2)), atol=1e-9)


def test_finite_diff_on_quadratic_is_theta():
    theta = Tensor(rng(12).normal(size=(5,)))
    g = finite_diff_grad(lambda t: (t * t).sum() * 0.5, theta)
    assert_allclose(g, theta.data, atol=1e-9)


def test_finite_diff_restores_theta():
    theta = Tensor(np.array([1.0, 2.0]))
    before = theta.data.copy()
    finite_diff_grad(lambda t: (t * t).sum(), theta)
    assert_allclose(theta.data, before)


def test_adam_zero_grad_keeps_params():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    st_ = AdamState([p])
    before = p.data.copy()
    for _ in range(5):
        adam_step([p], [np.zeros(2)], st_, lr=0.1)
    assert_allclose(p.data, before)


def test_adam_first_step_closed_form():
    # with fresh moments, one step moves by lr * g / (|g| + eps) elementwise
    g = np.array([0.3, -4.0, 1e-3])
    p = Tensor(np.zeros(3), requires_grad=True)
    st_ = AdamState([p])
    adam_step([p], [g], st_, lr=0.01)
    expect = -0.01 * g / (np.abs(g) + 1e-8)
    assert_allclose(p.data, expect, rtol=1e-9)


def test_adam_deterministic():
    def run():
        r = rng(13)
        p = Tensor(r.normal(size=(4,)), requires_grad=True)
        st_ = AdamState([p])
        for i in range(10):
            adam_step([p], [np.sin(p.data + i)], st_, lr=0.05)
        return p.data

    assert_allclose(run(), run(), atol=0.0)


def test_adam_shape_mismatch():
    p = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ShapeError):
        adam_step([p], [np.zeros(4)], AdamState([p]), lr=0.1)


def test_adam_wrapper_minimizes_quadratic():
    target = np.array([1.0, -2.0, 0.5])
    p = Tensor(np.zeros(3), requires_grad=True)
    opt = Adam([p], lr=0.1)
    for _ in range(200):
        opt.zero_grad()
        diff = p - Tensor(target)
        backward((diff * diff).sum())
        opt.step()
    assert_allclose(p.data, target, atol=1e-3)


# ---------------------------------------------------------------------------
# init and Linear


def test_uniform_init_bounds_and_determinism():
    w1 = uniform_init(np.random.default_rng(99), 16, (16, 8))
    w2 = uniform_init(np.random.default_rng(99), 16, (16, 8))
    assert_allclose(w1, w2, atol=0.0)
    assert np.abs(w1).max() <= 0.25
    assert np.abs(w1).max() > 0.2  # actually fills the range


def test_linear_applies_weight_and_bias():
    lin = Linear(np.random.default_rng(0), 3, 2, "lin", bias=True)
    x = Tensor(rng(14).normal(size=(5, 3)))
    assert_allclose(lin(x).data, x.data @ lin.w.data + lin.b.data, atol=1e-12)
    assert len(lin.parameters()) == 2
    assert lin.parameters()[1].name == "lin.bias"
