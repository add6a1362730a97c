"""Synthetic network generators (BA, WS, SBM), attribute synthesis and edge noise.

Every generator draws from its own ``numpy`` stream derived from
``(seed, stream)`` so structure, attributes and noise are reproducible
independently of each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, floor

import numpy as np

from .errors import InputError
from .graph import AttributedGraph

__all__ = [
    "NetGenConfig",
    "gen_ba",
    "gen_ws",
    "gen_sbm",
    "gen_attributes",
    "augment_noise",
    "generate",
    "rng_for",
]

_STREAM_STRUCTURE = 0
_STREAM_ATTRS = 1
_STREAM_NOISE = 2


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *stream]))


@dataclass(frozen=True)
class NetGenConfig:
    model: str = "BA"
    n: int = 1000
    ba_m: int = 5
    ws_k: int = 6
    ws_p: float = 0.5
    sbm_blocks: int = 100
    sbm_avg_degree: float = 10.0
    sbm_p_in: float | None = None
    sbm_p_out: float | None = None
    attr_dim: int = 10
    edge_dim: int = 1
    seed: int = 0

    def __post_init__(self):
        model = self.model.upper()
        object.__setattr__(self, "model", model)
        if model not in {"BA", "WS", "SBM"}:
            raise InputError(f"unknown network model {self.model!r}")
        if self.n < 1:
            raise InputError("n must be positive")
        if self.attr_dim < 1:
            raise InputError("attr_dim must be >= 1")

    @property
    def label(self) -> str:
        if self.model == "BA":
            return f"ba_m{self.ba_m}"
        if self.model == "WS":
            return f"ws_k{self.ws_k}"
        return f"sbm_b{self.sbm_blocks}"


def gen_ba(cfg: NetGenConfig) -> AttributedGraph:
    """Preferential attachment grown from a clique on ``ba_m`` seed nodes.

    Edge count is exactly ``C(m, 2) + (n - m) * m``.
    """
    n, m = cfg.n, cfg.ba_m
    if m < 1:
        raise InputError("ba_m must be >= 1")
    if m >= n:
        raise InputError(f"ba_m={m} must be smaller than n={n}")
    rng = rng_for(cfg.seed, _STREAM_STRUCTURE)
    edges = [(u, v) for u in range(m) for v in range(u + 1, m)]
    # each node appears once per incident edge
    ends: list[int] = [x for e in edges for x in e]
    for v in range(m, n):
        chosen: list[int] = []
        seen: set[int] = set()
        while len(chosen) < m:
            if ends:
                u = ends[int(rng.integers(len(ends)))]
            else:
                u = int(rng.integers(v))
            if u not in seen:
                seen.add(u)
                chosen.append(u)
        for u in chosen:
            edges.append((u, v))
            ends.extend((u, v))
    return AttributedGraph(n, edges)


def gen_ws(cfg: NetGenConfig) -> AttributedGraph:
    """Ring lattice with ``ws_k`` nearest neighbours, edges rewired with prob ``ws_p``."""
    n, k, p = cfg.n, cfg.ws_k, cfg.ws_p
    if k % 2:
        raise InputError(f"ws_k must be even, got {k}")
    if not 0 <= k < n:
        raise InputError(f"ws_k must satisfy 0 <= k < n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise InputError("ws_p must be a probability")
    rng = rng_for(cfg.seed, _STREAM_STRUCTURE)
    nbrs = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, k // 2 + 1):
            v = (u + j) % n
            nbrs[u].add(v)
            nbrs[v].add(u)
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= p or v not in nbrs[u]:
                continue
            if len(nbrs[u]) >= n - 1:
                continue
            while True:
                w = int(rng.integers(n))
                if w != u and w not in nbrs[u]:
                    break
            nbrs[u].discard(v)
            nbrs[v].discard(u)
            nbrs[u].add(w)
            nbrs[w].add(u)
    edges = [(u, v) for u in range(n) for v in nbrs[u] if u < v]
    return AttributedGraph(n, edges)


def sbm_probabilities(cfg: NetGenConfig) -> tuple[float, float]:
    """Within/between edge probabilities; drawn once per graph unless given."""
    rng = rng_for(cfg.seed, _STREAM_STRUCTURE, 1)
    p_in = cfg.sbm_p_in
    if p_in is None:
        p_in = float(rng.uniform(5.0, 15.0)) * cfg.sbm_avg_degree / cfg.n
    p_out = cfg.sbm_p_out
    if p_out is None:
        p_out = float(rng.uniform(0.1, 0.5)) * p_in
    return min(p_in, 1.0), min(p_out, 1.0)


def sbm_blocks(n: int, blocks: int) -> np.ndarray:
    return (np.arange(n) * blocks) // n


def gen_sbm(cfg: NetGenConfig) -> AttributedGraph:
    n, b = cfg.n, cfg.sbm_blocks
    if b < 1 or b > n:
        raise InputError(f"sbm_blocks must be in [1, n], got {b}")
    p_in, p_out = sbm_probabilities(cfg)
    block = sbm_blocks(n, b)
    rng = rng_for(cfg.seed, _STREAM_STRUCTURE)
    edges = []
    for u in range(n - 1):
        others = np.arange(u + 1, n)
        prob = np.where(block[others] == block[u], p_in, p_out)
        hit = rng.random(len(others)) < prob
        edges.extend((u, int(v)) for v in others[hit])
    return AttributedGraph(n, edges)


def gen_attributes(g: AttributedGraph, attr_dim: int, seed: int, edge_dim: int = 1) -> AttributedGraph:
    """Standard-normal node attributes and Uniform(0, 1] tie strengths."""
    if g.fx or g.fz:
        raise InputError("graph already carries attributes")
    if attr_dim < 1 or edge_dim < 1:
        raise InputError("attribute dimensions must be >= 1")
    rng = rng_for(seed, _STREAM_ATTRS)
    x = rng.standard_normal((g.n, attr_dim))
    z = 1.0 - rng.random((g.num_edges, edge_dim))
    return g.with_attributes(x, z)


def generate(cfg: NetGenConfig) -> AttributedGraph:
    gen = {"BA": gen_ba, "WS": gen_ws, "SBM": gen_sbm}[cfg.model]
    return gen_attributes(gen(cfg), cfg.attr_dim, cfg.seed, cfg.edge_dim)


def augment_noise(g: AttributedGraph, frac: float, seed: int) -> AttributedGraph:
    """Remove (``frac < 0``) or add (``frac > 0``) ``floor(|frac| * |E|)`` random edges."""
    if abs(frac) > 0.5:
        raise InputError(f"|frac| must be <= 0.5, got {frac}")
    count = floor(abs(frac) * g.num_edges)
    if frac == 0 or count == 0:
        return g
    rng = rng_for(seed, _STREAM_NOISE)
    if frac < 0:
        keep = np.sort(rng.choice(g.num_edges, g.num_edges - count, replace=False))
        return AttributedGraph(g.n, g.edges[keep], g.node_attrs, g.edge_attrs[keep])
    if comb(g.n, 2) - g.num_edges < count:
        raise InputError(f"cannot add {count} edges: not enough non-edges")
    new: set[tuple[int, int]] = set()
    while len(new) < count:
        u, v = (int(x) for x in rng.integers(g.n, size=2))
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        if key in new or g.has_edge(*key):
            continue
        new.add(key)
    added = sorted(new)
    z_new = 1.0 - rng.random((count, g.fz))
    edges = np.vstack([g.edges, np.array(added, dtype=np.int64)])
    z = np.vstack([g.edge_attrs, z_new])
    return AttributedGraph(g.n, edges, g.node_attrs, z)
