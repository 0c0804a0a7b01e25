import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from brainhgt import graph as G
from brainhgt.errors import ConstantRow, DenseWeightZero, DisconnectedInput, EmptyGraph


class TestPearson:
    def test_identical_rows(self):
        ts = np.array([[1.0, 4.0, 2.0, 8.0], [1.0, 4.0, 2.0, 8.0]])
        assert G.pearson_correlation(ts)[0, 1] == 1.0

    def test_sign_flip(self):
        ts = np.array([[1.0, 4.0, 2.0, 8.0], [-1.0, -4.0, -2.0, -8.0]])
        assert G.pearson_correlation(ts)[0, 1] == -1.0

    def test_hand_value(self):
        ts = [[1, 2, 3, 4], [1, 3, 2, 4]]
        # direct summation: deviations (-1.5,-.5,.5,1.5) and (-1.5,.5,-.5,1.5)
        a = [-1.5, -0.5, 0.5, 1.5]
        b = [-1.5, 0.5, -0.5, 1.5]
        cov = sum(x * y for x, y in zip(a, b))
        expected = cov / np.sqrt(sum(x * x for x in a) * sum(y * y for y in b))
        assert expected == pytest.approx(0.8, abs=1e-15)
        assert G.pearson_correlation(ts)[0, 1] == pytest.approx(0.8, abs=1e-15)

    def test_invariants(self):
        rng = np.random.default_rng(3)
        r = G.pearson_correlation(rng.normal(size=(12, 30)))
        assert np.array_equal(r, r.T)
        assert np.all(np.diag(r) == 1.0)
        assert r.min() >= -1 and r.max() <= 1

    def test_constant_row_rejected(self):
        with pytest.raises(ConstantRow) as info:
            G.pearson_correlation([[1, 2, 3], [5, 5, 5]])
        assert info.value.row == 1


class TestInverseGraph:
    def test_weights(self):
        r = np.array([[1, 0.5, 0], [0.5, 1, -0.25], [0, -0.25, 1]])
        g = G.inverse_distance_graph(r)
        d = g.to_matrix()
        assert d[0, 1] == 2.0
        assert d[1, 2] == 4.0
        assert np.isinf(d[0, 2])
        assert g.n_edges == 2


def _triangle():
    # |r| of 1, 1/2, 1/3 gives inverse weights 1, 2, 3
    return np.array([[1, 1.0, 0.5], [1.0, 1, 1 / 3], [0.5, 1 / 3, 1]])


class TestOrthogonalMSTs:
    def test_triangle(self):
        g = G.inverse_distance_graph(_triangle())
        trees = G.orthogonal_msts(g)
        pairs = [[(g.ei[e], g.ej[e]) for e in t] for t in trees]
        edges = list(zip(g.ei.tolist(), g.ej.tolist()))
        w = dict(zip(edges, g.weight))
        best = min(oracles.spanning_trees(3, edges), key=lambda t: sum(w[e] for e in t))
        assert sorted(pairs[0]) == sorted(best) == [(0, 1), (0, 2)]
        assert pairs[1] == [(1, 2)]
        assert len(trees) == 2

    def test_tree_input(self):
        r = np.eye(4)
        for i in range(3):
            r[i, i + 1] = r[i + 1, i] = 0.3 + 0.1 * i
        trees = G.orthogonal_msts(G.inverse_distance_graph(r))
        assert len(trees) == 1 and len(trees[0]) == 3

    def test_k4_matches_exclusion_oracle(self):
        rng = np.random.default_rng(11)
        r = oracles.random_connected_corr(4, rng)
        g = G.inverse_distance_graph(r)
        trees = G.orthogonal_msts(g)
        weights = {(int(i), int(j)): w for i, j, w in zip(g.ei, g.ej, g.weight)}
        remaining = dict(weights)
        expected = []
        while remaining:
            # brute force: best spanning forest over all edge subsets
            forest = oracles.min_spanning_forest_prim(4, remaining)
            expected.append(sorted(forest))
            for e in forest:
                del remaining[e]
        got = [sorted((int(g.ei[e]), int(g.ej[e])) for e in t) for t in trees]
        assert got == expected
        first = min(oracles.spanning_trees(4, list(weights)),
                    key=lambda t: sum(weights[e] for e in t))
        assert got[0] == sorted(first)
        assert len(got) == 2

    def test_empty_graph(self):
        with pytest.raises(EmptyGraph):
            G.orthogonal_msts(G.inverse_distance_graph(np.eye(3)))

    def test_pairwise_disjoint(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(3, 12))
            g = G.inverse_distance_graph(oracles.random_connected_corr(n, rng))
            trees = G.orthogonal_msts(g)
            flat = np.concatenate(trees)
            assert len(flat) == len(set(flat.tolist()))
            assert len(trees[0]) == n - 1

    def test_max_trees_default(self):
        assert G.default_max_trees(5, 10) == 3


class TestEfficiencyAndCost:
    def test_complete_graph(self):
        a = np.ones((5, 5)) - np.eye(5)
        assert G.global_efficiency(a) == 1.0

    def test_edgeless(self):
        assert G.global_efficiency(np.zeros((4, 4))) == 0.0

    def test_path(self):
        a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        assert oracles.global_efficiency(a) == pytest.approx(5 / 6, abs=1e-15)
        assert G.global_efficiency(a) == pytest.approx(5 / 6, abs=1e-15)

    def test_cost_all_and_none(self):
        r = _triangle()
        assert G.wiring_cost([(0, 1), (0, 2), (1, 2)], r) == 1.0
        assert G.wiring_cost([], r) == 0.0

    def test_cost_top_edge(self):
        r = np.array([[1, 0.5, 0.3], [0.5, 1, 0.2], [0.3, 0.2, 1]])
        assert oracles.wiring_cost([(0, 1)], r) == pytest.approx(0.5, abs=1e-15)
        assert G.wiring_cost([(0, 1)], r) == pytest.approx(0.5, abs=1e-15)

    def test_dense_weight_zero(self):
        with pytest.raises(DenseWeightZero):
            G.wiring_cost([], np.eye(3))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 9), st.integers(0, 10_000))
    def test_monotone_under_edge_addition(self, n, seed):
        rng = np.random.default_rng(seed)
        r = oracles.random_connected_corr(n, rng)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        rng.shuffle(pairs)
        a = np.zeros((n, n))
        ge_prev, cost_prev = 0.0, 0.0
        for k, (i, j) in enumerate(pairs, 1):
            a[i, j] = a[j, i] = 1
            ge = G.global_efficiency(a)
            cost = G.wiring_cost(pairs[:k], r)
            assert 0 <= ge <= 1 and 0 <= cost <= 1 + 1e-15
            assert ge >= ge_prev and cost >= cost_prev - 1e-15
            ge_prev, cost_prev = ge, cost


def _check_spl(g):
    s = g.spl
    n = g.n
    assert np.array_equal(s, s.T)
    assert np.all(np.diag(s) == 0)
    fw = oracles.floyd_warshall_hops(g.adjacency)
    expected = np.where(np.isfinite(fw), fw, n)
    assert np.array_equal(s, expected)
    reach = s < n
    # s[i, k] <= s[i, j] + s[j, k] over reachable triples
    via = s[:, :, None] + s[None, :, :]
    ok = reach[:, :, None] & reach[None, :, :]
    assert np.all((s[:, None, :] <= via) | ~ok)


class TestOMST:
    def test_matches_prefix_oracle_n5(self):
        rng = np.random.default_rng(2024)
        r = oracles.random_connected_corr(5, rng)
        g = G.omst_sparsify(r)
        expected, val = oracles.omst_prefix_oracle(r)
        assert g.edges() == expected
        assert g.objective == pytest.approx(val, abs=1e-12)
        _check_spl(g)

    def test_cheap_edges_are_all_kept(self):
        # weak edges cost almost nothing but shorten every path
        n = 6
        r = np.full((n, n), 1e-4)
        for i in range(n - 1):
            r[i, i + 1] = r[i + 1, i] = 0.9
        np.fill_diagonal(r, 1.0)
        g = G.omst_sparsify(r)
        assert len(g.edges()) == n * (n - 1) // 2
        assert g.ge == 1.0
        assert g.edges() == oracles.omst_prefix_oracle(r)[0]

    def test_sidecar_values_recompute(self):
        rng = np.random.default_rng(8)
        r = oracles.random_connected_corr(7, rng)
        g = G.omst_sparsify(r)
        ge, cost, obj = G.evaluate_graph(g.adjacency, r)
        assert abs(ge - g.ge) < 1e-12 and abs(cost - g.cost) < 1e-12
        assert abs(obj - g.objective) < 1e-12

    def test_disconnected_input(self):
        r = np.eye(4)
        r[0, 1] = r[1, 0] = 0.5
        r[2, 3] = r[3, 2] = 0.5
        with pytest.raises(DisconnectedInput):
            G.omst_sparsify(r)

    def test_edge_weights_match_adjacency(self):
        rng = np.random.default_rng(1)
        r = oracles.random_connected_corr(8, rng)
        g = G.omst_sparsify(r)
        iu, ju = np.nonzero(np.triu(g.adjacency, 1))
        assert sorted(zip(iu.tolist(), ju.tolist())) == g.edges()
        for (i, j), w in g.edge_weights.items():
            assert w == abs(r[i, j])

    def test_trees_recorded_disjoint(self):
        rng = np.random.default_rng(4)
        g = G.omst_sparsify(oracles.random_connected_corr(6, rng))
        flat = [e for t in g.trees for e in t]
        assert len(flat) == len(set(flat)) == 15


class TestThreshold:
    def test_full_density(self):
        rng = np.random.default_rng(0)
        r = oracles.random_connected_corr(6, rng)
        g = G.threshold_sparsify(r, 1.0)
        assert len(g.edge_weights) == 15 and g.density == 1.0
        assert g.ge == 1.0

    def test_tiny_density_keeps_strongest(self):
        rng = np.random.default_rng(1)
        r = oracles.random_connected_corr(6, rng)
        g = G.threshold_sparsify(r, 1e-6)
        iu, ju = np.triu_indices(6, 1)
        k = np.argmax(np.abs(r[iu, ju]))
        assert g.edges() == [(iu[k], ju[k])]

    def test_count_and_ties(self):
        r = np.full((5, 5), 0.5)
        np.fill_diagonal(r, 1)
        g = G.threshold_sparsify(r, 0.3)  # ceil(0.3 * 10) = 3 edges
        assert g.edges() == [(0, 1), (0, 2), (0, 3)]

    def test_spl_consistent(self):
        rng = np.random.default_rng(9)
        g = G.threshold_sparsify(oracles.random_connected_corr(9, rng), 0.15)
        _check_spl(g)
