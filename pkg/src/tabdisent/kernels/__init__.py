"""Hot-path kernels with a compiled core and a numpy fallback.

Two interchangeable implementations exist: ``_native`` (Cython, built at
install time when a compiler is available) and ``numpy_ops``. The active
one is chosen at import: native when present, numpy otherwise. Set
TABDISENT_BACKEND=numpy or =native to force a choice; forcing native when
the extension is missing raises immediately rather than silently
degrading.

Everything downstream calls through the module-level functions here, so
`use_backend` can swap the implementation at runtime (the parity tests
and the benchmark rely on that).
"""

import os

from . import numpy_ops

try:
    from . import _native
except ImportError:
    _native = None

_IMPLS = {"numpy": numpy_ops}
if _native is not None:
    _IMPLS["native"] = _native

_active = None
active_name = None


def available_backends():
    return sorted(_IMPLS)


def use_backend(name):
    """Bind all kernel entry points to the named implementation."""
    global _active, active_name
    if name not in _IMPLS:
        raise ImportError(
            f"kernel backend {name!r} is not available; built backends: {available_backends()}"
        )
    _active = _IMPLS[name]
    active_name = name


def matmul(a, b, transpose_a=False, transpose_b=False):
    return _active.matmul(a, b, transpose_a, transpose_b)


def softmax_lastdim(x):
    return _active.softmax_lastdim(x)


def softmax_lastdim_backward(y, grad_y):
    return _active.softmax_lastdim_backward(y, grad_y)


def leaky_relu(x, negative_slope):
    return _active.leaky_relu(x, negative_slope)


def leaky_relu_backward(x, grad_y, negative_slope):
    return _active.leaky_relu_backward(x, grad_y, negative_slope)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    return _active.adam_update(param, grad, m, v, lr, beta1, beta2, eps, step)


_requested = os.environ.get("TABDISENT_BACKEND", "").strip().lower()
if _requested:
    use_backend(_requested)
else:
    use_backend("native" if _native is not None else "numpy")
