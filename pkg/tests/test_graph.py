import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclesync.graph import GraphError, build_view_graph, common_neighbors, erdos_renyi_edges

from conftest import PROPERTY_CASES, small_graphs


def neighbor_sets(graph):
    return {tuple(e): set(ks) for e, ks in zip(graph.edges.tolist(), graph.triangles.as_lists())}


def test_single_triangle():
    g = build_view_graph(3, [(0, 1), (1, 2), (0, 2)])
    assert g.m == 3
    assert neighbor_sets(g) == {(0, 1): {2}, (0, 2): {1}, (1, 2): {0}}


def test_path_has_no_triangles():
    g = build_view_graph(4, [(0, 1), (1, 2)])
    assert neighbor_sets(g)[(0, 1)] == set()
    assert len(g.triangles.k) == 0


@pytest.mark.parametrize(
    "edges, message",
    [([(0, 0)], "self-loop"), ([(0, 3)], "outside"), ([(-1, 2)], "outside"), ([(0, 1), (1, 0)], "duplicate")],
)
def test_invalid_edges_rejected(edges, message):
    with pytest.raises(GraphError, match=message):
        build_view_graph(3, edges)


def test_error_names_offending_pair():
    with pytest.raises(GraphError, match=r"\(1, 1\)"):
        build_view_graph(3, [(0, 1), (1, 1)])


def test_complete_k4():
    g = build_view_graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    assert np.all(common_neighbors(g).counts() == 2)


def test_star_is_triangle_free():
    g = build_view_graph(6, [(0, k) for k in range(1, 6)])
    assert np.all(g.triangles.counts() == 0)


def test_erdos_renyi_matches_brute_force():
    g = build_view_graph(100, erdos_renyi_edges(100, 0.5, np.random.default_rng(3)))
    adj = np.zeros((100, 100), bool)
    adj[g.edges[:, 0], g.edges[:, 1]] = True
    adj |= adj.T
    for (i, j), ks in zip(g.edges, g.triangles.as_lists()):
        assert ks == np.flatnonzero(adj[i] & adj[j]).tolist()


def test_edge_index_round_trip():
    g = build_view_graph(5, [(3, 1), (0, 4), (2, 0)])
    assert g.edges.tolist() == [[0, 2], [0, 4], [1, 3]]
    for e, (i, j) in enumerate(g.edges):
        assert g.edge_id(i, j) == e == g.edge_id(j, i)
    with pytest.raises(GraphError):
        g.edge_id(1, 2)


def test_components():
    g = build_view_graph(4, [(0, 1), (2, 3)])
    assert not g.is_connected()
    h = build_view_graph(3, [(0, 1), (1, 2)])
    assert h.is_connected()
    assert not h.is_connected(np.array([1.0, 0.0]))


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(small_graphs())
def test_triangle_index_is_exact(g):
    adj = [set(a.tolist()) for a in g.adjacency]
    for i in range(g.n):
        assert list(g.adjacency[i]) == sorted(adj[i])
        for j in adj[i]:
            assert i in adj[j]
    for (i, j), ks in zip(g.edges.tolist(), g.triangles.as_lists()):
        assert ks == sorted(adj[i] & adj[j])
        assert g.edge_index[(i, j)] == g.edge_id(i, j)
    # edge ids stored in the index point at the right edges
    tri = g.triangles
    for e, k, ik, jk in zip(tri.owner, tri.k, tri.edge_ik, tri.edge_jk):
        i, j = g.edges[e]
        assert set(g.edges[ik]) == {i, k} and set(g.edges[jk]) == {j, k}


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(small_graphs(max_n=15), st.randoms(use_true_random=False))
def test_rebuild_in_any_order_is_identical(g, rnd):
    pairs = [tuple(e) if rnd.random() < 0.5 else tuple(e[::-1]) for e in g.edges.tolist()]
    rnd.shuffle(pairs)
    h = build_view_graph(g.n, pairs)
    assert np.array_equal(h.edges, g.edges)
    for a, b in zip(
        (g.triangles.offsets, g.triangles.k, g.triangles.edge_ik, g.triangles.edge_jk),
        (h.triangles.offsets, h.triangles.k, h.triangles.edge_ik, h.triangles.edge_jk),
    ):
        assert np.array_equal(a, b)
