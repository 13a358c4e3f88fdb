"""Adam with bias correction."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatchError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState):
    """One Adam update, in place on the parameter arrays.

    Moments are allocated lazily and keyed like params; iteration order is
    sorted by key so trajectories are reproducible.
    """
    if set(grads) - set(params):
        raise ShapeMismatchError(
            f"gradients for unknown parameters: {sorted(set(grads) - set(params))}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for key in sorted(grads):
        p, g = params[key], np.asarray(grads[key])
        if p.shape != g.shape:
            raise ShapeMismatchError(
                f"{key}: gradient shape {g.shape} != parameter shape {p.shape}")
        if key not in state.m:
            state.m[key] = np.zeros_like(p)
            state.v[key] = np.zeros_like(p)
        m, v = state.m[key], state.v[key]
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


class Adam:
    """Dictionary-of-parameters convenience wrapper around adam_step."""

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self, grads: dict) -> None:
        adam_step(self.params, grads, self.state)
