"""Finite-difference checks for every reverse-mode op.

Each op is probed through a scalar readout so the chain rule is exercised
end to end; central differences with h=1e-6 are the oracle.
"""
import numpy as np
import pytest

import rho
from rho import autodiff as ad
from rho.graph import laplacian_operator


def fd_gradient(fn, x, h=1e-6):
    grad = np.zeros_like(x, dtype=float)
    flat = grad.reshape(-1)
    for i in range(x.size):
        bump = x.copy().reshape(-1)
        bump[i] += h
        up = fn(bump.reshape(x.shape))
        bump[i] -= 2 * h
        dn = fn(bump.reshape(x.shape))
        flat[i] = (up - dn) / (2 * h)
    return grad


def check_op(build, x, tol=1e-7):
    """build maps a Var (or ndarray) to a scalar Var."""
    leaf = ad.Var(x.copy())
    out = build(leaf)
    out.backward()
    got = leaf.grad
    want = fd_gradient(lambda v: ad.value_of(build(ad.Var(v))).item(), x)
    scale = np.maximum(1.0, np.maximum(np.abs(got), np.abs(want)))
    assert np.max(np.abs(got - want) / scale) < tol


def test_arithmetic_ops_gradients():
    rng = np.random.default_rng(42)
    x = rng.normal(size=(3, 4))
    other = rng.normal(size=(3, 4)) + 3.0
    w = rng.normal(size=(3, 4))
    check_op(lambda v: ad.total(ad.mul(ad.add(v, other), w)), x)
    check_op(lambda v: ad.total(ad.mul(ad.sub(other, v), w)), x)
    check_op(lambda v: ad.total(ad.mul(ad.mul(v, other), v)), x)
    check_op(lambda v: ad.total(ad.div(ad.mul(v, w), other)), x)
    check_op(lambda v: ad.total(ad.div(other, ad.add(ad.mul(v, v), 1.0))), x)


def test_operator_overloads_match_functions():
    rng = np.random.default_rng(43)
    x = rng.normal(size=(2, 3))
    y = rng.normal(size=(2, 3))
    v = ad.Var(x)
    assert np.allclose(ad.value_of(v + y), x + y)
    assert np.allclose(ad.value_of(y - v), y - x)
    assert np.allclose(ad.value_of((-v) * 2.0), -2.0 * x)
    assert np.allclose(ad.value_of(v / 2.0), x / 2.0)
    assert np.allclose(ad.value_of(v.T), x.T)


def test_broadcast_bias_gradient_unbroadcasts():
    rng = np.random.default_rng(44)
    x = rng.normal(size=(5, 3))
    bias = rng.normal(size=3)
    w = rng.normal(size=(5, 3))
    leaf = ad.Var(bias.copy())
    out = ad.total(ad.mul(ad.add(x, leaf), w))
    out.backward()
    assert leaf.grad.shape == (3,)
    assert np.allclose(leaf.grad, w.sum(axis=0))


def test_matmul_and_transpose_gradients():
    rng = np.random.default_rng(45)
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(3, 5))
    w = rng.normal(size=(4, 5))
    check_op(lambda v: ad.total(ad.mul(ad.matmul(v, b), w)), a)
    check_op(lambda v: ad.total(ad.mul(ad.matmul(a, v), w)), b)
    w2 = rng.normal(size=(3, 4))
    check_op(lambda v: ad.total(ad.mul(ad.transpose(v), w2)), a)


def test_elementwise_nonlinearity_gradients():
    rng = np.random.default_rng(46)
    x = rng.normal(size=(4, 4)) * 2.0
    x[np.abs(x) < 0.2] += 0.5  # keep clear of the relu kink
    w = rng.normal(size=(4, 4))
    check_op(lambda v: ad.total(ad.mul(ad.relu(v), w)), x)
    check_op(lambda v: ad.total(ad.mul(ad.tanh(v), w)), x, tol=1e-6)
    check_op(lambda v: ad.total(ad.mul(ad.sqrt(ad.add(ad.mul(v, v), 1.0)), w)), x)
    check_op(lambda v: ad.total(ad.mul(ad.maximum(v, 0.4), w)), x)


def test_maximum_blocks_gradient_below_floor():
    leaf = ad.Var(np.array([0.1, 2.0]))
    out = ad.total(ad.maximum(leaf, 0.5))
    out.backward()
    assert np.allclose(leaf.grad, [0.0, 1.0])


def test_total_axis_and_keepdims_gradients():
    rng = np.random.default_rng(47)
    x = rng.normal(size=(3, 4))
    w_row = rng.normal(size=(1, 4))
    w_col = rng.normal(size=(3, 1))
    check_op(lambda v: ad.total(ad.mul(ad.total(v, axis=0, keepdims=True), w_row)), x)
    check_op(lambda v: ad.total(ad.mul(ad.total(v, axis=1, keepdims=True), w_col)), x)


def test_gather_rows_scatters_gradient():
    rng = np.random.default_rng(48)
    x = rng.normal(size=(6, 3))
    idx = np.array([0, 2, 2, 5])
    w = rng.normal(size=(4, 3))
    check_op(lambda v: ad.total(ad.mul(ad.gather_rows(v, idx), w)), x)
    # duplicated row accumulates both contributions
    leaf = ad.Var(x.copy())
    ad.total(ad.gather_rows(leaf, idx)).backward()
    assert np.allclose(leaf.grad[2], 2.0)
    assert np.allclose(leaf.grad[1], 0.0)


def test_hstack_gradient_splits():
    rng = np.random.default_rng(49)
    a = rng.normal(size=(3, 2))
    b = rng.normal(size=(3, 4))
    w = rng.normal(size=(3, 6))
    check_op(lambda v: ad.total(ad.mul(ad.hstack(v, b), w)), a)
    check_op(lambda v: ad.total(ad.mul(ad.hstack(a, v), w)), b)


def test_row_logsumexp_matches_masked_numpy_and_gradient():
    rng = np.random.default_rng(50)
    x = rng.normal(size=(4, 5)) * 3.0
    mask = rng.random(size=(4, 5)) < 0.6
    mask[:, 0] = True  # no fully masked rows
    got = ad.value_of(ad.row_logsumexp(ad.Var(x), mask))
    want = np.log(np.sum(np.exp(x) * mask, axis=1))
    assert np.allclose(got, want, atol=1e-12)
    w = rng.normal(size=4)
    check_op(lambda v: ad.total(ad.mul(ad.row_logsumexp(v, mask), w)), x)


def test_row_logsumexp_is_shift_stable():
    x = np.array([[1000.0, 1001.0], [-1000.0, -1001.0]])
    mask = np.ones_like(x, dtype=bool)
    got = ad.value_of(ad.row_logsumexp(ad.Var(x), mask))
    assert np.all(np.isfinite(got))
    assert abs(got[0] - (1001.0 + np.log1p(np.exp(-1.0)))) < 1e-9


def test_row_logsumexp_rejects_fully_masked_row():
    mask = np.array([[True, True], [False, False]])
    with pytest.raises(ValueError):
        ad.row_logsumexp(ad.Var(np.zeros((2, 2))), mask)


def test_laplacian_op_gradient_uses_symmetry():
    rng = np.random.default_rng(51)
    g = rho.build_graph([(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)], 4)
    op = laplacian_operator(g)
    x = rng.normal(size=(4, 3))
    w = rng.normal(size=(4, 3))
    check_op(lambda v: ad.total(ad.mul(ad.laplacian(op, v), w)), x)


def test_shared_subexpression_accumulates():
    leaf = ad.Var(np.array([3.0]))
    square = ad.mul(leaf, leaf)
    out = ad.total(ad.add(square, square))
    out.backward()
    assert np.allclose(leaf.grad, [12.0])  # d/dx 2x^2


def test_deep_chain_does_not_recurse():
    # iterative topological order must survive thousands of nodes
    v = ad.Var(np.array([1.0]))
    out = v
    for _ in range(5000):
        out = ad.add(out, 1.0)
    ad.total(out).backward()
    assert np.allclose(v.grad, [1.0])


def test_backward_requires_scalar():
    v = ad.Var(np.ones((2, 2)))
    with pytest.raises(ValueError):
        ad.add(v, 1.0).backward()


def test_value_of_passthrough():
    arr = np.arange(3.0)
    assert ad.value_of(arr) is arr
    assert np.allclose(ad.value_of(ad.Var(arr)), arr)
