"""Independent brute-force references used by the tests.

Everything here works from a dense 0/1 adjacency matrix with plain loops so
that it shares no code path with the package under test.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np


def random_adjacency(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    a = np.zeros((n, n), dtype=np.int64)
    for u, v in combinations(range(n), 2):
        if rng.random() < p:
            a[u, v] = a[v, u] = 1
    return a


def edges_of(a: np.ndarray) -> list[tuple[int, int]]:
    n = len(a)
    return [(u, v) for u in range(n) for v in range(u + 1, n) if a[u, v]]


def peers_of(a: np.ndarray, i: int) -> list[int]:
    return [j for j in range(len(a)) if a[i, j]]


def motif_oracle(a: np.ndarray, i: int, t) -> list[int]:
    """Counts in the order dyad(2), open triad(3), closed triad(3), open tetrad(4)."""
    peers = peers_of(a, i)
    dyad = [0, 0]
    for j in peers:
        dyad[int(t[j])] += 1
    open_triad, closed_triad = [0, 0, 0], [0, 0, 0]
    for j, k in combinations(peers, 2):
        bucket = closed_triad if a[j, k] else open_triad
        bucket[int(t[j]) + int(t[k])] += 1
    tetrad = [0, 0, 0, 0]
    for j, k, m in combinations(peers, 3):
        if not (a[j, k] or a[j, m] or a[k, m]):
            tetrad[int(t[j]) + int(t[k]) + int(t[m])] += 1
    return dyad + open_triad + closed_triad + tetrad


def components_oracle(a: np.ndarray, i: int, t) -> int:
    treated = [j for j in peers_of(a, i) if t[j]]
    seen: set[int] = set()
    count = 0
    for s in treated:
        if s in seen:
            continue
        count += 1
        stack = [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            for v in treated:
                if a[u, v] and v not in seen:
                    seen.add(v)
                    stack.append(v)
    return count


def clustering_oracle(a: np.ndarray, i: int, t) -> float:
    treated = [j for j in peers_of(a, i) if t[j]]
    pairs = list(combinations(treated, 2))
    if not pairs:
        return 0.0
    return sum(int(a[j, k]) for j, k in pairs) / len(pairs)


def mutual_oracle(a: np.ndarray, i: int, j: int) -> int:
    return int(sum(a[i, k] * a[j, k] for k in range(len(a))))


def weighted_fraction_oracle(a: np.ndarray, t, weight) -> np.ndarray:
    out = []
    for i in range(len(a)):
        num = den = 0.0
        for j in peers_of(a, i):
            w = weight(i, j)
            den += w
            num += w * t[j]
        out.append(num / den if den > 0 else 0.0)
    return np.array(out)
