"""Adam with decoupled weight decay, operating on named numpy arrays."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(self.step, {k: a.copy() for k, a in self.m.items()}, {k: a.copy() for k, a in self.v.items()})


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update; returns new parameter arrays and the advanced state.

    Weight decay is decoupled from the moment estimates:
    ``p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)``.
    """
    step = state.step + 1
    c1 = 1.0 - BETA1**step
    c2 = 1.0 - BETA2**step
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = BETA1 * state.m.get(name, np.zeros_like(p)) + (1.0 - BETA1) * g
        v = BETA2 * state.v.get(name, np.zeros_like(p)) + (1.0 - BETA2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + EPS)
        new_params[name] = p - lr * (update + weight_decay * p)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(step, new_m, new_v)
