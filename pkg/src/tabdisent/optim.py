"""Adam with bias correction over named parameter tensors."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GradientMissingError, NonFiniteError


@dataclass
class AdamState:
    """Optimizer state; m/v buffers mirror the parameter shapes."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(named_params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Fresh state for a {name: Tensor} parameter mapping."""
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, p in named_params.items():
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(named_params, state):
    """Apply one update to every parameter; gradients are consumed.

    Every parameter must carry a gradient (a full backward ran since the
    last step); grads are cleared afterwards so a stale gradient can
    never be applied twice.
    """
    missing = [name for name, p in named_params.items() if p.grad is None]
    if missing:
        raise GradientMissingError(f"adam_step: no gradient for {missing}")
    state.step += 1
    for name, p in named_params.items():
        kernels.adam_update(
            p.data, p.grad, state.m[name], state.v[name],
            state.lr, state.beta1, state.beta2, state.eps, state.step,
        )
        p.grad = None
        if not np.all(np.isfinite(p.data)):
            raise NonFiniteError(f"parameter {name!r} left the finite domain at step {state.step}")
