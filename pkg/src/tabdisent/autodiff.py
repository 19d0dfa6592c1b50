"""Reverse-mode automatic differentiation over dense rank-<=3 tensors.

The operator set is exactly what the attention autoencoder needs: matmul,
linear, leaky_relu, softmax_rows, mse, cosine similarities, and a few
scalar utilities. Each forward call records a closure on the output; a
`backward()` from a scalar root replays them in reverse topological order
and then frees the tape, so graphs live for one forward/backward pass
only.

Tensors are numpy-backed, float64 by default (gradient checking is
meaningless in float32; training may opt into float32 via the model
config). NaN or Inf in externally supplied data is rejected at
construction.
"""

import contextlib

import numpy as np

from . import kernels
from .errors import DegenerateInputError, NonFiniteError, ShapeMismatchError

_NORM_FLOOR = 1e-12

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (scoring, evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        # asarray with an order, not ascontiguousarray: the latter
        # silently promotes scalars to shape (1,).
        arr = np.asarray(data, order="C")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if arr.ndim > 3:
            raise ShapeMismatchError(f"tensors are rank <= 3, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor data contains NaN or Inf")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    def backward(self):
        """Backpropagate from a scalar root, then free the tape.

        Single use: the recording is discarded as it is consumed, and
        intermediate gradients are dropped once their node has pushed
        into its parents. Leaf gradients survive for the optimizer.
        """
        if self.data.size != 1:
            raise ShapeMismatchError(f"backward() needs a scalar root, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            fn = node._backward_fn
            if fn is None:
                continue
            fn(node.grad)
            node._backward_fn = None
            node._parents = ()
            if node is not self:
                node.grad = None


def _toposort(root):
    """Iterative DFS post-order: every node after all of its parents."""
    order, stack, seen = [], [(root, iter(root._parents))], {id(root)}
    while stack:
        _, parents = stack[-1]
        for p in parents:
            if id(p) not in seen:
                seen.add(id(p))
                stack.append((p, iter(p._parents)))
                break
        else:
            order.append(stack.pop()[0])
    return order


def tensor(data, requires_grad=False, dtype=None):
    """Public constructor; validates finiteness and rank."""
    arr = np.asarray(data, dtype=dtype if dtype is not None else None)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return Tensor(arr, requires_grad=requires_grad)


def _result(data, parents, backward_fn):
    """Wrap an op output, recording the tape entry when grads are on."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    else:
        out._parents = ()
        out._backward_fn = None
    return out


def _accumulate(t, g):
    # First assignment copies: backward closures may hand the same buffer
    # to several parents (add), and grads must never alias each other.
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g)
    else:
        t.grad += g


def _check_same_dtype(a, b):
    if a.data.dtype != b.data.dtype:
        raise TypeError(f"mixed dtypes {a.data.dtype.name} vs {b.data.dtype.name}")


def matmul(a, b, transpose_a=False, transpose_b=False):
    """op(a) @ op(b); 2D pairs or 3D pairs with a shared batch axis.

    Backward is the textbook pair dA = dC.B^T, dB = A^T.dC, adjusted for
    the transpose flags.
    """
    _check_same_dtype(a, b)
    if a.ndim != b.ndim or a.ndim not in (2, 3):
        raise ShapeMismatchError(f"matmul needs two 2D or two 3D tensors, got {a.shape} and {b.shape}")
    inner_a = a.shape[-2] if transpose_a else a.shape[-1]
    inner_b = b.shape[-1] if transpose_b else b.shape[-2]
    if inner_a != inner_b or (a.ndim == 3 and a.shape[0] != b.shape[0]):
        raise ShapeMismatchError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out_data = kernels.matmul(a.data, b.data, transpose_a, transpose_b)

    def backward_fn(g):
        if a.requires_grad:
            if transpose_a:
                da = kernels.matmul(b.data, g, transpose_b, True)
            else:
                da = kernels.matmul(g, b.data, False, not transpose_b)
            _accumulate(a, da)
        if b.requires_grad:
            if transpose_b:
                db = kernels.matmul(g, a.data, True, transpose_a)
            else:
                db = kernels.matmul(a.data, g, not transpose_a, False)
            _accumulate(b, db)

    return _result(out_data, (a, b), backward_fn)


def linear(x, weight, bias):
    """x @ weight + bias; x is (m, p) or (B, M, p), weight (p, q), bias (q,)."""
    _check_same_dtype(x, weight)
    _check_same_dtype(x, bias)
    p, q = weight.shape
    if x.shape[-1] != p or bias.shape != (q,):
        raise ShapeMismatchError(f"linear shapes disagree: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    x2 = x.data.reshape(-1, p)
    out = kernels.matmul(x2, weight.data) + bias.data
    out_data = out.reshape(x.shape[:-1] + (q,))

    def backward_fn(g):
        g2 = g.reshape(-1, q)
        if x.requires_grad:
            _accumulate(x, kernels.matmul(g2, weight.data, False, True).reshape(x.shape))
        if weight.requires_grad:
            _accumulate(weight, kernels.matmul(x2, g2, True, False))
        if bias.requires_grad:
            _accumulate(bias, g2.sum(axis=0))

    return _result(out_data, (x, weight, bias), backward_fn)


def leaky_relu(x, negative_slope=0.01):
    """Elementwise max(v, slope*v)."""
    if not 0.0 < negative_slope < 1.0:
        raise ValueError(f"negative_slope must lie in (0,1), got {negative_slope}")
    out_data = kernels.leaky_relu(x.data, negative_slope)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, kernels.leaky_relu_backward(x.data, g, negative_slope))

    return _result(out_data, (x,), backward_fn)


def softmax_rows(x):
    """Stabilized softmax along the last axis; rows sum to 1."""
    if x.ndim < 2:
        raise ShapeMismatchError(f"softmax_rows needs rank >= 2, got shape {x.shape}")
    y = kernels.softmax_lastdim(x.data)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, kernels.softmax_lastdim_backward(y, g))

    return _result(y, (x,), backward_fn)


def mse(a, b):
    """Mean over all elements of (a-b)^2, as a scalar tensor."""
    _check_same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mse shapes disagree: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size
    out_data = np.asarray((diff * diff).sum() / n, dtype=a.data.dtype)

    def backward_fn(g):
        coeff = g * 2.0 / n
        if a.requires_grad:
            _accumulate(a, coeff * diff)
        if b.requires_grad:
            _accumulate(b, -coeff * diff)

    return _result(out_data, (a, b), backward_fn)


def _flat_cosine_parts(av, bv):
    na = float(np.sqrt((av * av).sum()))
    nb = float(np.sqrt((bv * bv).sum()))
    if na < _NORM_FLOOR or nb < _NORM_FLOOR:
        raise DegenerateInputError("cosine similarity of a (near-)zero-norm tensor")
    c = float((av * bv).sum()) / (na * nb)
    return na, nb, c


def cosine_sim(a, b):
    """Cosine of the angle between a and b flattened to vectors."""
    _check_same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"cosine_sim shapes disagree: {a.shape} vs {b.shape}")
    av = a.data.reshape(-1)
    bv = b.data.reshape(-1)
    na, nb, c = _flat_cosine_parts(av, bv)
    out_data = np.asarray(c, dtype=a.data.dtype)

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, (g * (bv / (na * nb) - c * av / (na * na))).reshape(a.shape))
        if b.requires_grad:
            _accumulate(b, (g * (av / (na * nb) - c * bv / (nb * nb))).reshape(b.shape))

    return _result(out_data, (a, b), backward_fn)


def batch_cosine_mean(a, b):
    """Mean over the leading axis of per-sample flat cosine similarity.

    a and b are (B, ...) with identical shapes; sample i contributes
    cos(a_i, b_i) with Frobenius flattening. One tape node for the whole
    batch.
    """
    _check_same_dtype(a, b)
    if a.shape != b.shape or a.ndim < 2:
        raise ShapeMismatchError(f"batch_cosine_mean needs matching (B, ...) shapes, got {a.shape} vs {b.shape}")
    bsz = a.shape[0]
    af = a.data.reshape(bsz, -1)
    bf = b.data.reshape(bsz, -1)
    na = np.sqrt((af * af).sum(axis=1))
    nb = np.sqrt((bf * bf).sum(axis=1))
    if (na < _NORM_FLOOR).any() or (nb < _NORM_FLOOR).any():
        raise DegenerateInputError("cosine similarity of a (near-)zero-norm sample")
    dots = (af * bf).sum(axis=1)
    cos = dots / (na * nb)
    out_data = np.asarray(cos.mean(), dtype=a.data.dtype)

    def backward_fn(g):
        coeff = g / bsz
        if a.requires_grad:
            da = coeff * (bf / (na * nb)[:, None] - cos[:, None] * af / (na * na)[:, None])
            _accumulate(a, da.reshape(a.shape))
        if b.requires_grad:
            db = coeff * (af / (na * nb)[:, None] - cos[:, None] * bf / (nb * nb)[:, None])
            _accumulate(b, db.reshape(b.shape))

    return _result(out_data, (a, b), backward_fn)


def add(a, b):
    """Elementwise sum of two same-shape tensors."""
    _check_same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"add shapes disagree: {a.shape} vs {b.shape}")
    out_data = a.data + b.data

    def backward_fn(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(out_data, (a, b), backward_fn)


def mul(a, b):
    """Elementwise product of two same-shape tensors."""
    _check_same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mul shapes disagree: {a.shape} vs {b.shape}")
    out_data = a.data * b.data

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, g * b.data)
        if b.requires_grad:
            _accumulate(b, g * a.data)

    return _result(out_data, (a, b), backward_fn)


def scale(x, factor):
    """Multiply by a python scalar constant."""
    f = x.data.dtype.type(factor)
    out_data = x.data * f

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g * f)

    return _result(out_data, (x,), backward_fn)


def one_minus(x):
    """1 - x elementwise (complement of an attention map)."""
    out_data = x.data.dtype.type(1.0) - x.data

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, -g)

    return _result(out_data, (x,), backward_fn)


def sum_all(x):
    """Sum of all elements, as a scalar tensor."""
    out_data = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.full_like(x.data, g))

    return _result(out_data, (x,), backward_fn)


def mean_all(x):
    """Mean of all elements, as a scalar tensor."""
    n = x.data.size
    out_data = np.asarray(x.data.sum() / n, dtype=x.data.dtype)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.full_like(x.data, g / n))

    return _result(out_data, (x,), backward_fn)
