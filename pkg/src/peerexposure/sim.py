"""Treatment assignment, exposure mechanisms and outcome simulation.

Outcomes follow

    Y_i = k_i * rho_i + (tau_d + tau_em * em_i) * T_i + g_i + eps_i,
    k_i = delta_exp + delta_em * T_i                     (synthetic mode)
    k_i = delta_exp + delta_em * T_i * (1 + em_i)        (semi-synthetic mode)

where ``rho_i`` is the ground-truth exposure under the chosen mechanism,
``em_i`` a random-weight mean of effect-modifying attributes (zero in
synthetic mode) and ``g_i`` a linear confounder term. The counterfactual
branch flips every peer treatment, keeps ``T_i`` and reuses ``eps_i``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InputError
from .graph import AttributedGraph, mutual_connections, treated_clustering, treated_components
from .netgen import rng_for

__all__ = [
    "MECHANISMS",
    "SimConfig",
    "SimOutput",
    "assign_treatments",
    "true_exposure",
    "gen_outcomes",
    "flip_peers",
    "simulate",
    "cosine_weight",
    "write_sim_csv",
    "read_sim_csv",
]

MECHANISMS = ("clustering", "components", "mutual", "attr_sim", "tie_strength")

_STREAM_TREAT = 10
_STREAM_OUTCOME = 11
_STREAM_EPS = 12


@dataclass(frozen=True)
class SimConfig:
    mechanism: str = "mutual"
    tau_c: float = 0.5
    tau_d: float = 1.0
    tau_em: float = 0.5
    delta_exp: float = 1.0
    delta_em: float = 1.0
    conf_subset: tuple[int, ...] = (0, 1, 2, 3, 4)
    em_subset: tuple[int, ...] = ()
    noise_sd: float = 1.0
    seed: int = 0
    noise_seed: int | None = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise InputError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if not 0.0 <= self.tau_c <= 1.0:
            raise InputError("tau_c must lie in [0, 1]")
        if self.noise_sd < 0:
            raise InputError("noise_sd must be nonnegative")
        object.__setattr__(self, "conf_subset", tuple(int(c) for c in self.conf_subset))
        object.__setattr__(self, "em_subset", tuple(int(c) for c in self.em_subset))

    @property
    def semi_synthetic(self) -> bool:
        return bool(self.em_subset)

    def check_attrs(self, g: AttributedGraph) -> None:
        for name in ("conf_subset", "em_subset"):
            idx = getattr(self, name)
            if any(not 0 <= c < g.fx for c in idx):
                raise InputError(f"{name} {idx} outside attribute range [0, {g.fx})")


@dataclass
class SimOutput:
    t: np.ndarray
    y: np.ndarray
    y_cf: np.ndarray
    rho_true: np.ndarray
    rho_true_cf: np.ndarray
    hpe_true: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def cosine_weight(xi: np.ndarray, xj: np.ndarray) -> float:
    """Attribute similarity weight: cosine similarity clipped at zero."""
    ni, nj = np.linalg.norm(xi), np.linalg.norm(xj)
    if ni == 0 or nj == 0:
        return 0.0
    return max(0.0, float(xi @ xj) / (ni * nj))


def assign_treatments(g: AttributedGraph, cfg: SimConfig) -> np.ndarray:
    if not cfg.conf_subset:
        raise InputError("treatment model needs a nonempty conf_subset")
    cfg.check_attrs(g)
    if g.fz < 1:
        raise InputError("treatment model needs an edge attribute")
    rng = rng_for(cfg.seed, _STREAM_TREAT)
    w_t = rng.standard_normal(len(cfg.conf_subset))
    xc = g.node_attrs[:, cfg.conf_subset]
    own = xc @ w_t
    peer = np.zeros(g.n)
    for i in range(g.n):
        nb = g.adjacency[i]
        if not nb:
            continue
        zsum = sum(g.edge_attr(i, j)[0] for j in nb)
        peer[i] = (xc[list(nb)].sum(axis=0) @ w_t) / zsum
    has_peers = g.degree() > 0
    logit = np.where(has_peers, cfg.tau_c * peer + (1.0 - cfg.tau_c) * own, own)
    prob = 1.0 / (1.0 + np.exp(-logit))
    return (rng.random(g.n) < prob).astype(np.int64)


def _weighted_fraction(g: AttributedGraph, t: np.ndarray, weight: Callable[[int, int], float]) -> np.ndarray:
    out = np.zeros(g.n)
    for i in range(g.n):
        num = den = 0.0
        for j in g.adjacency[i]:
            w = weight(i, j)
            den += w
            if t[j]:
                num += w
        out[i] = num / den if den > 0 else 0.0
    return out


def true_exposure(
    g: AttributedGraph,
    t,
    mechanism: str,
    similarity: Callable[[np.ndarray, np.ndarray], float] = cosine_weight,
) -> np.ndarray:
    t = np.asarray(t)
    if t.shape != (g.n,):
        raise InputError(f"treatment vector has shape {t.shape}, expected ({g.n},)")
    if mechanism == "clustering":
        return np.array([treated_clustering(g, i, t) for i in range(g.n)])
    if mechanism == "components":
        return np.array([treated_components(g, i, t) for i in range(g.n)], dtype=np.float64)
    if mechanism == "mutual":
        return _weighted_fraction(g, t, lambda i, j: np.sqrt(mutual_connections(g, i, j)))
    if mechanism == "attr_sim":
        x = g.node_attrs
        return _weighted_fraction(g, t, lambda i, j: similarity(x[i], x[j]))
    if mechanism == "tie_strength":
        return _weighted_fraction(g, t, lambda i, j: float(g.edge_attr(i, j)[0]))
    raise InputError(f"unknown mechanism {mechanism!r}")


def flip_peers(t, i: int) -> np.ndarray:
    t = np.asarray(t)
    if not 0 <= i < len(t):
        raise InputError(f"node id {i} out of range [0, {len(t)})")
    out = 1 - t
    out[i] = t[i]
    return out


def _structural_terms(g: AttributedGraph, cfg: SimConfig):
    rng = rng_for(cfg.seed, _STREAM_OUTCOME)
    c = len(cfg.conf_subset)
    w_self = rng.standard_normal(c)
    w_peer = rng.standard_normal(c)
    w_deg = rng.standard_normal()
    xc = g.node_attrs[:, cfg.conf_subset]
    deg = g.degree().astype(np.float64)
    peer_mean = np.zeros((g.n, c))
    for i in range(g.n):
        if g.adjacency[i]:
            peer_mean[i] = xc[list(g.adjacency[i])].mean(axis=0)
    deg_scaled = deg / deg.mean() if deg.mean() > 0 else deg
    confound = xc @ w_self + peer_mean @ w_peer + w_deg * deg_scaled
    if cfg.semi_synthetic:
        w_em = rng.uniform(0.0, 1.0, len(cfg.em_subset))
        em = g.node_attrs[:, cfg.em_subset] @ w_em / w_em.sum()
    else:
        em = np.zeros(g.n)
    return confound, em


def gen_outcomes(g: AttributedGraph, t, cfg: SimConfig) -> SimOutput:
    cfg.check_attrs(g)
    t = np.asarray(t, dtype=np.int64)
    if t.shape != (g.n,):
        raise InputError(f"treatment vector has shape {t.shape}, expected ({g.n},)")
    rho = true_exposure(g, t, cfg.mechanism)
    # the exposure of i only reads peer treatments, so flipping every entry
    # yields flip_peers(t, i) from i's point of view for all i at once
    rho_cf = true_exposure(g, 1 - t, cfg.mechanism)
    confound, em = _structural_terms(g, cfg)
    if cfg.semi_synthetic:
        coef = cfg.delta_exp + cfg.delta_em * t * (1.0 + em)
    else:
        coef = cfg.delta_exp + cfg.delta_em * t
    direct = (cfg.tau_d + cfg.tau_em * em) * t
    noise_seed = cfg.seed if cfg.noise_seed is None else cfg.noise_seed
    eps = cfg.noise_sd * rng_for(noise_seed, _STREAM_EPS).standard_normal(g.n)
    base = direct + confound + eps
    y = coef * rho + base
    y_cf = coef * rho_cf + base
    return SimOutput(t=t, y=y, y_cf=y_cf, rho_true=rho, rho_true_cf=rho_cf, hpe_true=coef * (rho - rho_cf))


def simulate(g: AttributedGraph, cfg: SimConfig) -> SimOutput:
    return gen_outcomes(g, assign_treatments(g, cfg), cfg)


_CSV_COLUMNS = ("node", "t", "y", "y_cf", "rho", "rho_cf", "hpe")


def write_sim_csv(sim: SimOutput, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CSV_COLUMNS)
        for i in range(len(sim)):
            w.writerow(
                [i, int(sim.t[i])]
                + [repr(float(v[i])) for v in (sim.y, sim.y_cf, sim.rho_true, sim.rho_true_cf, sim.hpe_true)]
            )


def read_sim_csv(path: str | Path) -> SimOutput:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != _CSV_COLUMNS:
        raise InputError(f"{path}: expected columns {','.join(_CSV_COLUMNS)}")
    rows.sort(key=lambda r: int(r["node"]))
    if [int(r["node"]) for r in rows] != list(range(len(rows))):
        raise InputError(f"{path}: node ids must be 0..n-1")

    def col(name: str) -> np.ndarray:
        return np.array([float(r[name]) for r in rows])

    return SimOutput(
        t=np.array([int(r["t"]) for r in rows], dtype=np.int64),
        y=col("y"),
        y_cf=col("y_cf"),
        rho_true=col("rho"),
        rho_true_cf=col("rho_cf"),
        hpe_true=col("hpe"),
    )
