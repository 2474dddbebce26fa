"""Adam with bias-corrected moment estimates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_model(cls, model) -> "AdamState":
        return cls(model.zeros_like(), model.zeros_like(), 0)


def adam_step(model, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Apply one Adam update to ``model`` in place and return ``(model, state)``.

    theta -= lr * m_hat / (sqrt(v_hat) + eps), with m_hat = m / (1 - beta1**t)
    and v_hat = v / (1 - beta2**t).
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, param in model.arrays().items():
        g = grads[name]
        if g.shape != param.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {param.shape}")
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return model, state
