"""Minimal reverse-mode automatic differentiation over numpy arrays.

Implements exactly the operations the detector's forward pass needs: dense
arithmetic with broadcasting, matrix products, activations, row gathering,
sparse Laplacian application, and a masked row-wise log-sum-exp. Every Var
wraps a float64 ndarray; calling backward() on a scalar Var accumulates
gradients into every leaf on its computation path.

Each op function also accepts plain ndarrays and then just computes the
value, so the forward pass can be written once and run either taped or
untaped.
"""

from __future__ import annotations

import numpy as np

from .graph import SparseSymOp, laplacian_apply


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the original operand shape."""
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Var:
    """Node of the computation tape: a value plus how to push gradients back."""

    __slots__ = ("value", "grad", "_parents", "_vjps", "name")

    # Make numpy hand binary ops with ndarray on the left back to Var's
    # reflected operators instead of coercing Var into an object array.
    __array_ufunc__ = None

    def __init__(self, value, _parents=(), _vjps=(), name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._vjps = _vjps
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, name={self.name!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def backward(self):
        """Accumulate d(self)/d(leaf) into .grad over the whole tape."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar root")
        order = _topological_order(self)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                contrib = vjp(g)
                parent.grad = contrib if parent.grad is None else parent.grad + contrib


def _topological_order(root: Var) -> list:
    """Iterative post-order DFS: parents appear before their consumers."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    return order


def _lift(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _any_var(*args) -> bool:
    return any(isinstance(a, Var) for a in args)


def add(a, b):
    if not _any_var(a, b):
        return np.add(a, b)
    a, b = _lift(a), _lift(b)
    return Var(a.value + b.value, (a, b),
               (lambda g: _unbroadcast(g, a.value.shape),
                lambda g: _unbroadcast(g, b.value.shape)))


def sub(a, b):
    if not _any_var(a, b):
        return np.subtract(a, b)
    a, b = _lift(a), _lift(b)
    return Var(a.value - b.value, (a, b),
               (lambda g: _unbroadcast(g, a.value.shape),
                lambda g: _unbroadcast(-g, b.value.shape)))


def mul(a, b):
    if not _any_var(a, b):
        return np.multiply(a, b)
    a, b = _lift(a), _lift(b)
    return Var(a.value * b.value, (a, b),
               (lambda g: _unbroadcast(g * b.value, a.value.shape),
                lambda g: _unbroadcast(g * a.value, b.value.shape)))


def div(a, b):
    if not _any_var(a, b):
        return np.divide(a, b)
    a, b = _lift(a), _lift(b)
    return Var(a.value / b.value, (a, b),
               (lambda g: _unbroadcast(g / b.value, a.value.shape),
                lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)))


def matmul(a, b):
    if not _any_var(a, b):
        return np.matmul(a, b)
    a, b = _lift(a), _lift(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError("matmul supports 2-D operands only")
    return Var(a.value @ b.value, (a, b),
               (lambda g: g @ b.value.T,
                lambda g: a.value.T @ g))


def transpose(a):
    if not isinstance(a, Var):
        return np.transpose(a)
    return Var(a.value.T, (a,), (lambda g: np.asarray(g).T,))


def relu(x):
    if not isinstance(x, Var):
        return np.maximum(x, 0.0)
    # np.maximum keeps NaN values visible to downstream finite checks
    mask = x.value > 0
    return Var(np.maximum(x.value, 0.0), (x,), (lambda g: g * mask,))


def tanh(x):
    if not isinstance(x, Var):
        return np.tanh(x)
    t = np.tanh(x.value)
    return Var(t, (x,), (lambda g: g * (1.0 - t * t),))


def sqrt(x):
    if not isinstance(x, Var):
        return np.sqrt(x)
    s = np.sqrt(x.value)
    return Var(s, (x,), (lambda g: g * (0.5 / s),))


def maximum(x, floor: float):
    """Elementwise max with a scalar; the gradient is zero where clamped."""
    if not isinstance(x, Var):
        return np.maximum(x, floor)
    mask = x.value > floor
    return Var(np.maximum(x.value, floor), (x,), (lambda g: g * mask,))


def total(x, axis=None, keepdims: bool = False):
    """Sum over all elements or along one axis."""
    if not isinstance(x, Var):
        return np.sum(x, axis=axis, keepdims=keepdims)
    value = x.value.sum(axis=axis, keepdims=keepdims)
    shape = x.value.shape

    def vjp(g):
        g = np.asarray(g, dtype=np.float64)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape)

    return Var(value, (x,), (vjp,))


def gather_rows(x, idx):
    """Select rows by index; gradients scatter-add back."""
    idx = np.asarray(idx, dtype=np.int64)
    if not isinstance(x, Var):
        return x[idx]

    def vjp(g):
        out = np.zeros_like(x.value)
        np.add.at(out, idx, g)
        return out

    return Var(x.value[idx], (x,), (vjp,))


def hstack(a, b):
    """Concatenate two matrices along axis 1."""
    if not _any_var(a, b):
        return np.concatenate([a, b], axis=1)
    a, b = _lift(a), _lift(b)
    split = a.value.shape[1]
    return Var(np.concatenate([a.value, b.value], axis=1), (a, b),
               (lambda g: np.asarray(g)[:, :split],
                lambda g: np.asarray(g)[:, split:]))


def _masked_lse(values: np.ndarray, mask: np.ndarray):
    shifted = np.where(mask, values, -np.inf)
    peak = shifted.max(axis=1, keepdims=True)
    weights = np.exp(shifted - peak)
    sums = weights.sum(axis=1, keepdims=True)
    lse = (peak + np.log(sums)).ravel()
    return lse, weights / sums


def row_logsumexp(x, mask: np.ndarray):
    """Stable log(sum(exp(row))) over the entries where ``mask`` is True.

    Every row must have at least one unmasked entry. Gradients distribute as
    the masked softmax of the row.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=1).all():
        raise ValueError("row_logsumexp: some row has no unmasked entries")
    if not isinstance(x, Var):
        return _masked_lse(np.asarray(x, dtype=np.float64), mask)[0]
    lse, softmax = _masked_lse(x.value, mask)
    return Var(lse, (x,), (lambda g: np.asarray(g)[:, None] * softmax,))


def laplacian(op: SparseSymOp, x):
    """Apply the normalized Laplacian; the operator is symmetric, so the
    gradient is the same application."""
    if not isinstance(x, Var):
        return laplacian_apply(op, x)
    return Var(laplacian_apply(op, x.value), (x,),
               (lambda g: laplacian_apply(op, np.asarray(g)),))


def value_of(x) -> np.ndarray:
    """The underlying ndarray of a Var, or the input itself."""
    return x.value if isinstance(x, Var) else np.asarray(x)
