"""Attributed undirected graphs, ego networks and local treatment statistics.

The statistics here (mutual connections, clustering and connected components
among treated peers, causal network motif counts) serve both as ground-truth
exposure mechanisms for the simulator and as hand-crafted baseline features.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "AttributedGraph",
    "EgoNetwork",
    "MotifCounts",
    "extract_ego",
    "mutual_connections",
    "treated_clustering",
    "treated_components",
    "motif_counts",
    "motif_features",
    "triangles",
    "read_graph",
    "write_graph",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class AttributedGraph:
    """Immutable undirected simple graph with node and edge attribute vectors.

    Edges are stored once, as ``(u, v)`` with ``u < v``, sorted
    lexicographically; ``edge_attrs[e]`` belongs to ``edges[e]``.
    """

    def __init__(
        self,
        n: int,
        edges: Iterable[Sequence[int]] | np.ndarray,
        node_attrs: np.ndarray | None = None,
        edge_attrs: np.ndarray | None = None,
    ):
        n = int(n)
        if n < 0:
            raise InputError(f"node count must be nonnegative, got {n}")
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        if e.size == 0:
            e = np.zeros((0, 2), dtype=np.int64)
        if e.ndim != 2 or e.shape[1] != 2:
            raise InputError("edges must be a sequence of (u, v) pairs")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise InputError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise InputError("self-loops are not allowed")

        if edge_attrs is None:
            za = np.zeros((len(e), 0))
        else:
            za = np.asarray(edge_attrs, dtype=np.float64)
            if za.ndim == 1:
                za = za[:, None]
            if za.shape[0] != len(e):
                raise InputError(f"{za.shape[0]} edge attribute rows for {len(e)} edges")

        canon = np.sort(e, axis=1)
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        canon, za = canon[order], za[order]
        if len(canon) > 1 and np.any(np.all(canon[1:] == canon[:-1], axis=1)):
            raise InputError("duplicate edges are not allowed")

        if node_attrs is None:
            xa = np.zeros((n, 0))
        else:
            xa = np.asarray(node_attrs, dtype=np.float64)
            if xa.ndim == 1:
                xa = xa[:, None]
            if xa.shape[0] != n:
                raise InputError(f"{xa.shape[0]} node attribute rows for {n} nodes")

        self.n = n
        self.edges = _frozen(canon)
        self.node_attrs = _frozen(xa)
        self.edge_attrs = _frozen(za)

        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in canon.tolist():
            nbrs[u].append(v)
            nbrs[v].append(u)
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in nbrs)
        self._nbr_sets = tuple(frozenset(a) for a in self.adjacency)
        self._edge_index = {(u, v): k for k, (u, v) in enumerate(canon.tolist())}

    # -- basic queries -------------------------------------------------
    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def fx(self) -> int:
        return self.node_attrs.shape[1]

    @property
    def fz(self) -> int:
        return self.edge_attrs.shape[1]

    def degree(self, i: int | None = None):
        if i is None:
            return np.array([len(a) for a in self.adjacency], dtype=np.int64)
        return len(self.adjacency[self._check(i)])

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[self._check(i)]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._nbr_sets[u]

    def edge_id(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self._edge_index[key]
        except KeyError:
            raise InputError(f"no edge between {u} and {v}") from None

    def edge_attr(self, u: int, v: int) -> np.ndarray:
        return self.edge_attrs[self.edge_id(u, v)]

    def with_attributes(self, node_attrs: np.ndarray, edge_attrs: np.ndarray) -> "AttributedGraph":
        return AttributedGraph(self.n, self.edges, node_attrs, edge_attrs)

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = True
            a[self.edges[:, 1], self.edges[:, 0]] = True
        return a

    def _check(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise InputError(f"node id {i} out of range [0, {self.n})")
        return int(i)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.node_attrs, other.node_attrs)
            and np.array_equal(self.edge_attrs, other.edge_attrs)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"AttributedGraph(n={self.n}, edges={self.num_edges}, fx={self.fx}, fz={self.fz})"


@dataclass(frozen=True)
class EgoNetwork:
    """Subgraph induced on the neighbors of ``ego`` (the ego itself removed).

    Ego-incident edge attributes are relocated onto the peers
    (``relocated_attrs[p] = Z[ego, peers[p]]``).
    """

    ego: int
    peers: tuple[int, ...]
    peer_edges: tuple[tuple[int, int], ...]
    peer_treatments: np.ndarray
    relocated_attrs: np.ndarray
    peer_edge_attrs: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.peers)


@dataclass(frozen=True)
class MotifCounts:
    dyad: tuple[int, int] = (0, 0)
    open_triad: tuple[int, int, int] = (0, 0, 0)
    closed_triad: tuple[int, int, int] = (0, 0, 0)
    open_tetrad: tuple[int, int, int, int] = (0, 0, 0, 0)

    def as_array(self) -> np.ndarray:
        return np.array(self.dyad + self.open_triad + self.closed_triad + self.open_tetrad, dtype=np.int64)


def _treatment_vector(g: AttributedGraph, t) -> np.ndarray:
    t = np.asarray(t)
    if t.shape != (g.n,):
        raise InputError(f"treatment vector has shape {t.shape}, expected ({g.n},)")
    return t.astype(np.int64)


def extract_ego(g: AttributedGraph, i: int, t) -> EgoNetwork:
    i = g._check(i)
    t = _treatment_vector(g, t)
    peers = g.adjacency[i]
    peer_set = g._nbr_sets[i]
    pe: list[tuple[int, int]] = []
    for j in peers:
        for k in g.adjacency[j]:
            if k > j and k in peer_set:
                pe.append((j, k))
    fz = g.fz
    reloc = np.array([g.edge_attr(i, j) for j in peers]).reshape(len(peers), fz)
    pea = np.array([g.edge_attr(j, k) for j, k in pe]).reshape(len(pe), fz)
    return EgoNetwork(
        ego=i,
        peers=peers,
        peer_edges=tuple(pe),
        peer_treatments=t[list(peers)] if peers else np.zeros(0, dtype=np.int64),
        relocated_attrs=reloc,
        peer_edge_attrs=pea,
    )


def mutual_connections(g: AttributedGraph, i: int, j: int) -> int:
    i, j = g._check(i), g._check(j)
    if i == j:
        raise InputError("mutual connections need two distinct nodes")
    a, b = g._nbr_sets[i], g._nbr_sets[j]
    if len(a) > len(b):
        a, b = b, a
    return sum(1 for k in a if k in b)


def _treated_peers(g: AttributedGraph, i: int, t: np.ndarray) -> list[int]:
    return [j for j in g.adjacency[i] if t[j]]


def treated_clustering(g: AttributedGraph, i: int, t) -> float:
    """Edge density among the treated peers of ``i`` (0 for fewer than two)."""
    t = _treatment_vector(g, t)
    tp = _treated_peers(g, g._check(i), t)
    k = len(tp)
    if k < 2:
        return 0.0
    tset = set(tp)
    links = sum(1 for j in tp for m in g.adjacency[j] if m > j and m in tset)
    return links / comb(k, 2)


def treated_components(g: AttributedGraph, i: int, t) -> int:
    t = _treatment_vector(g, t)
    tp = _treated_peers(g, g._check(i), t)
    parent = {j: j for j in tp}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = len(tp)
    for j in tp:
        for m in g.adjacency[j]:
            if m > j and m in parent:
                rj, rm = find(j), find(m)
                if rj != rm:
                    parent[rm] = rj
                    components -= 1
    return components


def motif_counts(ego: EgoNetwork) -> MotifCounts:
    """Count dyads, open/closed triads and open tetrads by number of treated peers.

    Open tetrads (pairwise unconnected peer triples) are counted with
    inclusion-exclusion over edges, wedges and triangles of the ego network,
    so hubs with hundreds of peers stay cheap.
    """
    d = ego.degree
    if d == 0:
        return MotifCounts()
    tr = np.asarray(ego.peer_treatments, dtype=np.int64)
    a = int(tr.sum())
    b = d - a
    pos = {p: idx for idx, p in enumerate(ego.peers)}

    pairs = [comb(a, 0) * comb(b, 2), a * b, comb(a, 2)]
    closed = [0, 0, 0]
    local = [[] for _ in range(d)]
    for j, k in ego.peer_edges:
        pj, pk = pos[j], pos[k]
        closed[tr[pj] + tr[pk]] += 1
        local[pj].append(pk)
        local[pk].append(pj)
    open_ = [pairs[s] - closed[s] for s in range(3)]

    # edge term: each edge with s treated endpoints plus any third peer
    edge_term = [0, 0, 0, 0]
    for s in range(3):
        if closed[s]:
            edge_term[s] += closed[s] * (b - (2 - s))
            edge_term[s + 1] += closed[s] * (a - s)
    # wedge term: paths p - q - r centred at q
    wedge_term = [0, 0, 0, 0]
    tri_term = [0, 0, 0, 0]
    local_sets = [set(x) for x in local]
    for q in range(d):
        nbr = local[q]
        if len(nbr) < 2:
            continue
        na = int(sum(tr[r] for r in nbr))
        nb = len(nbr) - na
        for jt in range(3):
            wedge_term[jt + tr[q]] += comb(na, jt) * comb(nb, 2 - jt)
        for p in nbr:
            if p <= q:
                continue
            for r in local[p]:
                if r > p and r in local_sets[q]:
                    tri_term[tr[q] + tr[p] + tr[r]] += 1
    total = [comb(a, k) * comb(b, 3 - k) for k in range(4)]
    tetrad = [total[k] - edge_term[k] + wedge_term[k] - tri_term[k] for k in range(4)]
    return MotifCounts(
        dyad=(b, a),
        open_triad=tuple(open_),  # type: ignore[arg-type]
        closed_triad=tuple(closed),  # type: ignore[arg-type]
        open_tetrad=tuple(tetrad),  # type: ignore[arg-type]
    )


_MOTIF_BLOCKS = ((0, 2), (2, 5), (5, 8), (8, 12))


def motif_features(ego: EgoNetwork | MotifCounts, normalize: bool = True) -> np.ndarray:
    """12-dim motif vector; each category divided by its own total when ``normalize``."""
    counts = ego if isinstance(ego, MotifCounts) else motif_counts(ego)
    raw = counts.as_array().astype(np.float64)
    if not normalize:
        return raw
    out = np.zeros_like(raw)
    for lo, hi in _MOTIF_BLOCKS:
        s = raw[lo:hi].sum()
        if s > 0:
            out[lo:hi] = raw[lo:hi] / s
    return out


def triangles(g: AttributedGraph) -> np.ndarray:
    """All triangles as rows ``(a, b, c)`` with ``a < b < c``, sorted."""
    out = []
    adj = g.adjacency
    sets = g._nbr_sets
    for u, v in g.edges.tolist():
        su = sets[u]
        for w in adj[v]:
            if w > v and w in su:
                out.append((u, v, w))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


# -- file format -----------------------------------------------------------


def write_graph(g: AttributedGraph, path: str | Path) -> None:
    lines = [f"n {g.n} fx {g.fx} fz {g.fz}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in g.node_attrs)
    for (u, v), z in zip(g.edges.tolist(), g.edge_attrs):
        lines.append(" ".join([str(u), str(v)] + [repr(float(x)) for x in z]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path: str | Path) -> AttributedGraph:
    lines = Path(path).read_text().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise InputError(f"{path}: empty graph file")
    head = lines[0].split()
    if len(head) != 6 or head[0::2] != ["n", "fx", "fz"]:
        raise InputError(f"{path}: bad header {lines[0]!r}")
    try:
        n, fx, fz = int(head[1]), int(head[3]), int(head[5])
    except ValueError:
        raise InputError(f"{path}: bad header {lines[0]!r}") from None
    if len(lines) < 1 + n:
        raise InputError(f"{path}: expected {n} node attribute lines")
    x = np.zeros((n, fx))
    for i in range(n):
        vals = lines[1 + i].split()
        if len(vals) != fx:
            raise InputError(f"{path}: node {i} has {len(vals)} attributes, expected {fx}")
        x[i] = [float(v) for v in vals]
    edges, z = [], []
    for lineno, line in enumerate(lines[1 + n :], start=2 + n):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 + fz:
            raise InputError(f"{path}:{lineno}: expected 'u v' plus {fz} edge attributes")
        u, v = int(parts[0]), int(parts[1])
        if u >= v:
            raise InputError(f"{path}:{lineno}: edges must be listed once with u < v")
        edges.append((u, v))
        z.append([float(p) for p in parts[2:]])
    return AttributedGraph(n, edges, x, np.array(z).reshape(len(edges), fz))
