"""numpy implementation of the hot-path kernels.

This is the fallback backend and the reference the compiled extension is
tested against. All functions accept C-contiguous float32/float64 arrays
and return arrays of the same dtype. No gradient bookkeeping happens here;
the autodiff layer composes these primitives.
"""

import numpy as np


def matmul(a, b, transpose_a=False, transpose_b=False):
    """op(a) @ op(b) for 2-D/3-D operands in any mix.

    A 2-D operand paired with a 3-D one is broadcast across the batch.
    Each operand transposes its own trailing two axes, so the flags work
    the same regardless of rank.
    """
    if a.ndim not in (2, 3) or b.ndim not in (2, 3):
        raise ValueError(
            f"matmul operands must be 2-D or 3-D, got {a.ndim}-D and {b.ndim}-D"
        )
    if transpose_a:
        a = a.swapaxes(-1, -2)
    if transpose_b:
        b = b.swapaxes(-1, -2)
    return np.matmul(a, b)


def softmax_lastdim(x):
    """Row-max-stabilized softmax along the last axis."""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_lastdim_backward(y, grad_y):
    """Jacobian-vector product given the forward output y."""
    inner = (y * grad_y).sum(axis=-1, keepdims=True)
    return y * (grad_y - inner)


def leaky_relu(x, negative_slope):
    return np.where(x >= 0, x, x * negative_slope)


def leaky_relu_backward(x, grad_y, negative_slope):
    return np.where(x >= 0, grad_y, grad_y * negative_slope)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    """One bias-corrected Adam update, in place on param, m and v.

    step is the 1-based count of updates applied so far including this one.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
