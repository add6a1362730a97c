"""Hand-crafted exposure baselines fed to the same feature map and TARNet head.

``fraction``: share of treated neighbours. ``motif``: 12 causal network
motif features of the ego network under the given treatments.
"""
from __future__ import annotations

import enum

import numpy as np

from .graph import AttributedGraph, extract_ego, motif_features

__all__ = ["BaselineKind", "fraction_exposure", "motif_exposure", "fit_baseline"]


class BaselineKind(str, enum.Enum):
    FRACTION = "fraction"
    MOTIF = "motif"


def fraction_exposure(g: AttributedGraph, t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros(g.n)
    for i, nb in enumerate(g.adjacency):
        if nb:
            out[i] = t[list(nb)].sum() / len(nb)
    return out


def motif_exposure(g: AttributedGraph, t, normalize: bool = True) -> np.ndarray:
    return np.array([motif_features(extract_ego(g, i, t), normalize) for i in range(g.n)]).reshape(g.n, 12)


def baseline_exposure(g: AttributedGraph, t, kind: str | BaselineKind, normalize: bool = True) -> np.ndarray:
    """(n, k) exposure matrix for a baseline kind."""
    kind = BaselineKind(kind)
    if kind is BaselineKind.FRACTION:
        return fraction_exposure(g, t)[:, None]
    return motif_exposure(g, t, normalize)


def fit_baseline(g: AttributedGraph, sim, kind: str | BaselineKind, cfg=None):
    """Train the shared feature map + TARNet head on a baseline exposure."""
    from dataclasses import replace

    from .model import TrainConfig, fit

    cfg = cfg if cfg is not None else TrainConfig()
    return fit(g, sim, replace(cfg, exposure=BaselineKind(kind).value, head="tarnet"))
