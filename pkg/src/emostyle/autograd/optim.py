"""Adam optimiser."""

from dataclasses import dataclass, field

import numpy as np

from emostyle.errors import ShapeMismatch


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")


def adam_step(params, grads, state):
    """Bias-corrected Adam update of ``params`` (arrays, modified in place).

    Returns ``(params, state)``; moment buffers are created on the first call.
    """
    if len(params) != len(grads):
        raise ShapeMismatch(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    c1 = 1 - state.beta1**state.t
    c2 = 1 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeMismatch(f"gradient {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p -= step.astype(p.dtype, copy=False)
    return params, state


class Adam:
    """Adam over a list of leaf tensors, reading their ``.grad``."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step([p.data for p in self.params], [p.grad for p in self.params], self.state)
