"""Adam with bias correction, and per-component gradient clipping.

Hyper-parameters follow the training recipe: learning rate 0.005, Adam
moment decays at their usual defaults, gradients clamped to the L-inf
ball of radius 10 before the update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Tensor

LEARNING_RATE = 0.005
CLIP_THRESHOLD = 10.0


@dataclass
class AdamState:
    lr: float = LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def clip_gradients(grads: dict[str, np.ndarray],
                   threshold: float = CLIP_THRESHOLD) -> dict[str, np.ndarray]:
    """Clamp every gradient component to [-threshold, threshold] (the
    literal projection onto the L-inf ball)."""
    return {name: np.clip(g, -threshold, threshold) for name, g in grads.items()}


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState):
    """One Adam update, in place on params. Returns (params, state)."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
