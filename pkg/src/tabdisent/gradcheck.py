"""Finite-difference verification of tape gradients.

`grad_check` is the oracle the whole numerics layer is tested against:
central differences with h=1e-6 in double precision, compared entry by
entry against a single backward pass.
"""

import numpy as np

from .autodiff import Tensor, no_grad, tensor


def _eval(f, arrays):
    with no_grad():
        out = f(*[tensor(a) for a in arrays])
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    return float(out.data)


def grad_check(f, inputs, h=1e-6, exclude=None):
    """Worst relative error between tape and central-difference gradients.

    f: callable taking len(inputs) Tensors and returning a scalar Tensor.
    inputs: float64 arrays (the differentiation points).
    exclude: optional parallel list of boolean masks; True entries are
    skipped (used to stay away from the LeakyReLU kink).

    The error for one entry is |ad - fd| / max(|ad|, |fd|, 1): relative
    for gradients of order one and above, absolute below, so near-zero
    entries cannot blow up the ratio through finite-difference noise.
    """
    arrays = [np.ascontiguousarray(x, dtype=np.float64) for x in inputs]
    leaves = [tensor(a, requires_grad=True) for a in arrays]
    out = f(*leaves)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    out.backward()
    analytic = [
        leaf.grad if leaf.grad is not None else np.zeros_like(arr)
        for leaf, arr in zip(leaves, arrays)
    ]

    worst = 0.0
    for which, base in enumerate(arrays):
        mask = None if exclude is None else exclude[which]
        flat = base.reshape(-1)
        ad_flat = analytic[which].reshape(-1)
        for j in range(flat.size):
            if mask is not None and mask.reshape(-1)[j]:
                continue
            saved = flat[j]
            flat[j] = saved + h
            up = _eval(f, arrays)
            flat[j] = saved - h
            down = _eval(f, arrays)
            flat[j] = saved
            fd = (up - down) / (2.0 * h)
            ad = ad_flat[j]
            err = abs(ad - fd) / max(abs(ad), abs(fd), 1.0)
            worst = max(worst, err)
    return worst
