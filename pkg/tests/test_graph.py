from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    clustering_oracle,
    components_oracle,
    edges_of,
    motif_oracle,
    mutual_oracle,
    random_adjacency,
)
from peerexposure import AttributedGraph, InputError, read_graph, write_graph
from peerexposure.graph import (
    MotifCounts,
    extract_ego,
    motif_counts,
    motif_features,
    mutual_connections,
    treated_clustering,
    treated_components,
    triangles,
)

TRIANGLE = AttributedGraph(3, [(0, 1), (1, 2), (0, 2)])
PATH = AttributedGraph(3, [(0, 1), (1, 2)])
K4 = AttributedGraph(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])


def graph_from(a, rng=None, fx=2, fz=1):
    rng = rng or np.random.default_rng(0)
    e = edges_of(a)
    return AttributedGraph(len(a), e, rng.normal(size=(len(a), fx)), rng.uniform(0.1, 1, size=(len(e), fz)))


@st.composite
def small_graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**31))
    p = draw(st.floats(0.0, 1.0))
    rng = np.random.default_rng(seed)
    a = random_adjacency(rng, n, p)
    t = rng.integers(0, 2, size=n)
    return a, t


# -- construction ------------------------------------------------------------


def test_edges_canonicalised_and_sorted():
    g = AttributedGraph(4, [(3, 1), (0, 2), (1, 0)], edge_attrs=[[0.3], [0.2], [0.1]])
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 3]]
    assert g.edge_attr(1, 0)[0] == 0.1
    assert g.edge_attr(3, 1)[0] == 0.3
    assert g.adjacency == ((1, 2), (0, 3), (0,), (1,))


@pytest.mark.parametrize(
    "edges",
    [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)], [(-1, 0)]],
    ids=["self-loop", "duplicate", "out-of-range", "negative"],
)
def test_invalid_edges_rejected(edges):
    with pytest.raises(InputError):
        AttributedGraph(3, edges)


def test_attribute_row_counts_checked():
    with pytest.raises(InputError):
        AttributedGraph(3, [(0, 1)], node_attrs=np.zeros((2, 1)))
    with pytest.raises(InputError):
        AttributedGraph(3, [(0, 1)], edge_attrs=np.zeros((2, 1)))


def test_graph_is_immutable():
    with pytest.raises(ValueError):
        TRIANGLE.edges[0, 0] = 2


def test_adjacency_symmetric_and_degree():
    rng = np.random.default_rng(1)
    a = random_adjacency(rng, 10, 0.4)
    g = graph_from(a)
    np.testing.assert_array_equal(g.adjacency_matrix(), a)
    np.testing.assert_array_equal(g.degree(), a.sum(1))


# -- ego networks --------------------------------------------------------------


def test_extract_ego_triangle():
    ego = extract_ego(TRIANGLE, 0, [0, 1, 1])
    assert ego.peers == (1, 2)
    assert ego.peer_edges == ((1, 2),)
    assert ego.peer_treatments.tolist() == [1, 1]


def test_extract_ego_path_and_star():
    ego = extract_ego(PATH, 1, [0, 0, 0])
    assert ego.peers == (0, 2) and ego.peer_edges == ()
    star = AttributedGraph(6, [(0, k) for k in range(1, 6)])
    ego = extract_ego(star, 0, np.zeros(6))
    assert ego.peers == (1, 2, 3, 4, 5) and ego.peer_edges == ()


def test_extract_ego_relocates_edge_attributes():
    g = AttributedGraph(3, [(0, 1), (0, 2), (1, 2)], edge_attrs=[[0.5], [0.7], [0.9]])
    ego = extract_ego(g, 0, [0, 0, 0])
    assert ego.relocated_attrs[:, 0].tolist() == [0.5, 0.7]
    assert ego.peer_edge_attrs[:, 0].tolist() == [0.9]


def test_extract_ego_bad_node():
    with pytest.raises(InputError):
        extract_ego(TRIANGLE, 3, [0, 0, 0])
    with pytest.raises(InputError):
        extract_ego(TRIANGLE, 0, [0, 0])


# -- local statistics ------------------------------------------------------------


def test_mutual_connections_examples():
    assert mutual_connections(TRIANGLE, 0, 1) == 1
    assert mutual_connections(PATH, 0, 2) == 1
    assert mutual_connections(PATH, 0, 1) == 0
    assert all(mutual_connections(K4, u, v) == 2 for u in range(4) for v in range(4) if u != v)
    with pytest.raises(InputError):
        mutual_connections(PATH, 1, 1)


def test_treated_clustering_examples():
    g = AttributedGraph(4, [(0, 1), (0, 2), (0, 3), (1, 2)])
    assert treated_clustering(g, 0, [0, 1, 1, 1]) == pytest.approx(1 / 3)
    assert treated_clustering(g, 0, [0, 1, 0, 0]) == 0.0
    assert treated_clustering(K4, 0, [0, 1, 1, 1]) == 1.0


def test_treated_components_examples():
    g = AttributedGraph(4, [(0, 1), (0, 2), (0, 3), (1, 2)])
    assert treated_components(g, 0, [0, 1, 1, 1]) == 2
    assert treated_components(g, 0, [1, 0, 0, 0]) == 0
    star = AttributedGraph(5, [(0, k) for k in range(1, 5)])
    assert treated_components(star, 0, [0, 1, 1, 1, 1]) == 4


def test_motif_counts_examples():
    ego = extract_ego(TRIANGLE, 0, [0, 1, 1])
    m = motif_counts(ego)
    assert m == MotifCounts((0, 2), (0, 0, 0), (0, 0, 1), (0, 0, 0, 0))

    star = AttributedGraph(4, [(0, 1), (0, 2), (0, 3)])
    m = motif_counts(extract_ego(star, 0, [0, 1, 0, 1]))
    assert m.open_triad == (0, 2, 1)
    assert m.closed_triad == (0, 0, 0)
    assert m.open_tetrad == (0, 0, 1, 0)

    lonely = AttributedGraph(2, [])
    assert motif_counts(extract_ego(lonely, 0, [1, 1])).as_array().sum() == 0


def test_motif_features_normalisation():
    f = motif_features(MotifCounts((0, 2), (0, 0, 0), (1, 1, 2), (0, 0, 0, 0)))
    np.testing.assert_allclose(f, [0, 1, 0, 0, 0, 0.25, 0.25, 0.5, 0, 0, 0, 0])
    raw = motif_features(MotifCounts((0, 2), (0, 0, 0), (1, 1, 2), (0, 0, 0, 0)), normalize=False)
    np.testing.assert_array_equal(raw, [0, 2, 0, 0, 0, 1, 1, 2, 0, 0, 0, 0])


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_local_statistics_match_brute_force(case):
    a, t = case
    g = graph_from(a)
    for i in range(len(a)):
        ego = extract_ego(g, i, t)
        assert motif_counts(ego).as_array().tolist() == motif_oracle(a, i, t)
        assert treated_components(g, i, t) == components_oracle(a, i, t)
        assert treated_clustering(g, i, t) == clustering_oracle(a, i, t)
        for j in range(len(a)):
            if j != i:
                assert mutual_connections(g, i, j) == mutual_oracle(a, i, j)


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_motif_totals(case):
    a, t = case
    g = graph_from(a)
    for i in range(len(a)):
        m = motif_counts(extract_ego(g, i, t))
        d = int(a[i].sum())
        assert sum(m.dyad) == d
        assert sum(m.open_triad) + sum(m.closed_triad) == d * (d - 1) // 2
        assert min(m.as_array()) >= 0


@settings(max_examples=30, deadline=None)
@given(small_graphs(max_n=8), st.randoms(use_true_random=False))
def test_motif_counts_invariant_to_relabelling(case, rnd):
    a, t = case
    n = len(a)
    perm = list(range(n))
    rnd.shuffle(perm)
    inv = np.argsort(perm)
    b = a[np.ix_(inv, inv)]  # node perm[i] of the new graph is node i of the old
    t2 = np.asarray(t)[inv]
    g, h = graph_from(a), graph_from(b)
    for i in range(n):
        assert motif_counts(extract_ego(g, i, t)) == motif_counts(extract_ego(h, perm[i], t2))


def test_triangles_enumeration():
    assert triangles(K4).tolist() == [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
    assert triangles(PATH).shape == (0, 3)
    rng = np.random.default_rng(5)
    a = random_adjacency(rng, 9, 0.5)
    expected = sorted(
        (u, v, w) for u, v, w in permutations(range(9), 3) if u < v < w and a[u, v] and a[v, w] and a[u, w]
    )
    assert [tuple(x) for x in triangles(graph_from(a)).tolist()] == expected


# -- file format -------------------------------------------------------------------


def test_graph_file_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    g = graph_from(random_adjacency(rng, 8, 0.5), rng, fx=3, fz=2)
    path = tmp_path / "g.txt"
    write_graph(g, path)
    assert read_graph(path) == g
    header = path.read_text().splitlines()[0]
    assert header == "n 8 fx 3 fz 2"


def test_graph_file_rejects_unsorted_edge(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("n 2 fx 1 fz 1\n0.0\n1.0\n1 0 0.5\n")
    with pytest.raises(InputError):
        read_graph(path)


def test_graph_file_rejects_short_attribute_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("n 2 fx 2 fz 1\n0.0\n1.0 2.0\n0 1 0.5\n")
    with pytest.raises(InputError):
        read_graph(path)
