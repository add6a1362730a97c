"""Central finite differences for validating analytic gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np


def finite_difference(f: Callable[[dict[str, np.ndarray]], float], params: dict[str, np.ndarray], step: float = 1e-5):
    """Central-difference gradient of scalar ``f`` w.r.t. every entry of ``params``."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = f(params)
            flat[k] = orig - step
            down = f(params)
            flat[k] = orig
            gflat[k] = (up - down) / (2.0 * step)
        out[name] = g
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    """``||a - n|| / max(||a||, ||n||)``, zero when both are below ``floor``."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)
