import numpy as np
import pytest

from specsparse import (
    WeightedGraph,
    build_spanning_tree,
    total_stretch,
    tree_path_resistance,
)
from specsparse.errors import ConnectivityError, ParameterError
from specsparse.tree import SpanningTree

from oracles import dense_laplacian, random_connected_graph, trace_pinv_product


def path_tree_of_c4(c4):
    """The explicit path tree {(0,1),(1,2),(2,3)} of the unit C4."""
    idx = [c4.edge_index()[(0, 1)], c4.edge_index()[(1, 2)], c4.edge_index()[(2, 3)]]
    return SpanningTree(c4, np.array(idx))


class TestBuildSpanningTree:
    def test_triangle_max_weight(self):
        g = WeightedGraph.from_edges(3, [(0, 1, 3.0), (1, 2, 2.0), (0, 2, 1.0)])
        t = build_spanning_tree(g)
        assert t.tree_edge_set == {(0, 1), (1, 2)}

    def test_tree_shaped_graph_is_identity(self):
        g = WeightedGraph.from_edges(5, [(0, 1, 1.0), (1, 2, 2.0), (1, 3, 3.0), (3, 4, 1.0)])
        t = build_spanning_tree(g)
        assert t.tree_edge_set == {(0, 1), (1, 2), (1, 3), (3, 4)}

    def test_c4_tie_break_deterministic(self, c4):
        # greedy by descending weight, ties ascending (u,v): picks (0,1),(0,3),(1,2)
        t = build_spanning_tree(c4)
        assert t.tree_edge_set == {(0, 1), (0, 3), (1, 2)}
        # any valid 3-edge subtree of C4 is a path; check via degrees
        deg = np.zeros(4, int)
        for u, v in t.tree_edge_set:
            deg[u] += 1
            deg[v] += 1
        assert sorted(deg) == [1, 1, 2, 2]

    def test_disconnected_rejected(self):
        g = WeightedGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
        with pytest.raises(ConnectivityError):
            build_spanning_tree(g)

    def test_tree_edges_keep_source_weights(self):
        g = random_connected_graph(25, 30, seed=7)
        t = build_spanning_tree(g)
        idx = g.edge_index()
        for u, v in t.tree_edge_set:
            assert (u, v) in idx

    @pytest.mark.parametrize("method", ["max-weight", "akpw-lsst"])
    def test_methods_yield_valid_spanning_trees(self, method):
        for seed in range(4):
            g = random_connected_graph(30, 45, seed)
            t = build_spanning_tree(g, method=method)
            assert len(t.tree_edge_set) == g.n - 1
            assert t.depth.max() < g.n
            # determinism: same graph, same tree
            t2 = build_spanning_tree(g, method=method)
            assert t.tree_edge_set == t2.tree_edge_set


class TestPathResistance:
    def test_unit_path(self, p3):
        t = build_spanning_tree(p3)
        assert tree_path_resistance(t, 0, 2) == pytest.approx(2.0)

    def test_single_edge_is_reciprocal_weight(self):
        g = WeightedGraph.from_edges(2, [(0, 1, 4.0)])
        t = build_spanning_tree(g)
        assert tree_path_resistance(t, 0, 1) == pytest.approx(0.25)

    def test_same_vertex_rejected(self, p3):
        t = build_spanning_tree(p3)
        with pytest.raises(ParameterError):
            tree_path_resistance(t, 1, 1)

    def test_symmetry(self):
        g = random_connected_graph(20, 12, seed=5)
        t = build_spanning_tree(g)
        rng = np.random.default_rng(0)
        for _ in range(20):
            p, q = rng.choice(20, size=2, replace=False)
            assert t.path_resistance(p, q) == pytest.approx(t.path_resistance(q, p))

    def test_matches_dense_pseudoinverse(self):
        # e_pq^T pinv(L_tree) e_pq is the effective resistance in a tree
        g = random_connected_graph(30, 0, seed=11)
        t = build_spanning_tree(g)
        lap_pinv = np.linalg.pinv(dense_laplacian(t.as_graph()))
        rng = np.random.default_rng(1)
        for _ in range(25):
            p, q = map(int, rng.choice(30, size=2, replace=False))
            e = np.zeros(30)
            e[p], e[q] = 1.0, -1.0
            expected = float(e @ lap_pinv @ e)
            assert t.path_resistance(p, q) == pytest.approx(expected, abs=1e-10)

    def test_matches_naive_parent_walk(self):
        g = random_connected_graph(40, 25, seed=13)
        t = build_spanning_tree(g)

        def naive(p, q):
            res = {p: 0.0}
            v, acc = p, 0.0
            while t.parent[v] != v:
                acc += 1.0 / t.parent_weight[v]
                v = int(t.parent[v])
                res[v] = acc
            v, acc = q, 0.0
            while v not in res:
                acc += 1.0 / t.parent_weight[v]
                v = int(t.parent[v])
            return acc + res[v]

        rng = np.random.default_rng(2)
        for _ in range(30):
            p, q = map(int, rng.choice(40, size=2, replace=False))
            assert t.path_resistance(p, q) == pytest.approx(naive(p, q), rel=1e-12)


class TestTotalStretch:
    def test_tree_stretch_is_n_minus_1(self):
        g = random_connected_graph(15, 0, seed=3)
        t = build_spanning_tree(g)
        assert total_stretch(g, t) == pytest.approx(14.0)

    def test_c4_path_tree(self, c4):
        t = path_tree_of_c4(c4)
        # three tree edges contribute 1 each; the chord (0,3) has path resistance 3
        assert total_stretch(c4, t) == pytest.approx(6.0)
        lg, ls = dense_laplacian(c4), dense_laplacian(t.as_graph())
        assert total_stretch(c4, t) == pytest.approx(trace_pinv_product(ls, lg), rel=1e-10)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_dense_trace(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 26))
        g = random_connected_graph(n, int(rng.integers(5, 3 * n)), seed + 40)
        t = build_spanning_tree(g)
        expected = trace_pinv_product(dense_laplacian(t.as_graph()), dense_laplacian(g))
        assert total_stretch(g, t) == pytest.approx(expected, rel=1e-8)

    def test_lower_bound(self):
        for seed in range(4):
            g = random_connected_graph(20, 30, seed)
            t = build_spanning_tree(g)
            assert total_stretch(g, t) >= g.n - 1 - 1e-9
