"""Connectivity analysis against networkx and scipy oracles."""

import networkx as nx
import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from lrplab.cluster import (
    bfs_distances,
    component_diameter,
    connected_components,
    escape_vs_giant,
    max_degree,
    second_largest_size,
)
from lrplab.core import flat_graph

from conftest import make_params, random_connected_flat


def to_nx(graph):
    g = nx.Graph()
    g.add_nodes_from(range(graph.n_vertices))
    g.add_edges_from(map(tuple, graph.edges))
    return g


class TestConnectedComponents:
    def test_against_networkx(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 60))
            m = int(rng.integers(0, 2 * n))
            pairs = rng.integers(0, n, size=(m, 2))
            pairs = pairs[pairs[:, 0] != pairs[:, 1]]
            g = flat_graph(n, pairs)
            lab = connected_components(g)
            oracle = sorted((len(c) for c in nx.connected_components(to_nx(g))), reverse=True)
            assert lab.sizes.tolist() == oracle
            # labels are consistent partitions
            for k in range(lab.n_components):
                comp = lab.component(k)
                assert len(comp) == lab.sizes[k]

    def test_size_order_and_tie_break(self):
        # two components of size 2: the one containing the smaller vertex wins
        g = flat_graph(5, [(3, 4), (0, 1)])
        lab = connected_components(g)
        assert lab.labels[0] == 0 and lab.labels[3] == 1
        np.testing.assert_array_equal(lab.sizes, [2, 2, 1])
        assert second_largest_size(lab) == 2

    def test_permutation_invariance_of_sizes(self, rng):
        g = random_connected_flat(30, rng)
        lab = connected_components(g)
        perm = rng.permutation(30)
        permuted = flat_graph(30, [(int(perm[u]), int(perm[v])) for u, v in g.edges])
        lab2 = connected_components(permuted)
        np.testing.assert_array_equal(lab.sizes, lab2.sizes)

    def test_single_vertex(self):
        lab = connected_components(flat_graph(1, []))
        assert lab.n_components == 1
        assert second_largest_size(lab) == 0


class TestBfsDistances:
    def test_against_scipy(self, rng):
        for _ in range(10):
            g = random_connected_flat(int(rng.integers(5, 50)), rng)
            sp = shortest_path(g.to_sparse(), unweighted=True)
            for src in (0, g.n_vertices - 1):
                d = bfs_distances(g, src)
                np.testing.assert_array_equal(d, sp[src].astype(int))

    def test_unreachable_sentinel(self):
        g = flat_graph(4, [(0, 1)])
        d = bfs_distances(g, 0)
        assert d[2] == d[3] == 4  # n_vertices sentinel
        assert d[1] == 1

    def test_bad_source(self):
        with pytest.raises(ValueError):
            bfs_distances(flat_graph(3, []), 5)


class TestComponentDiameter:
    def test_exact_against_networkx(self, rng):
        for _ in range(10):
            g = random_connected_flat(int(rng.integers(4, 40)), rng)
            got = component_diameter(g, np.arange(g.n_vertices), mode="exact")
            assert got == nx.diameter(to_nx(g))

    def test_two_sweep_is_lower_bound_and_close(self, rng):
        tight = 0
        for _ in range(15):
            g = random_connected_flat(int(rng.integers(5, 60)), rng)
            exact = component_diameter(g, np.arange(g.n_vertices), mode="exact")
            lower = component_diameter(g, np.arange(g.n_vertices), mode="two_sweep_lower")
            assert lower <= exact
            assert lower >= exact - 1  # empirically the sweep misses by at most 1 here
            tight += lower == exact
        assert tight >= 7

    def test_exact_cap(self):
        g = flat_graph(30, [(i, i + 1) for i in range(29)])
        with pytest.raises(ValueError):
            component_diameter(g, np.arange(30), mode="exact", exact_cap=10)

    def test_trivial_cases(self):
        g = flat_graph(3, [(0, 1)])
        assert component_diameter(g, np.array([2]), mode="exact") == 0
        with pytest.raises(ValueError):
            component_diameter(g, np.array([], dtype=int), mode="exact")
        with pytest.raises(ValueError):
            component_diameter(g, np.array([0, 2]), mode="exact")  # disconnected


class TestMaxDegree:
    def test_basic_and_region(self):
        g = flat_graph(5, [(0, 1), (0, 2), (0, 3), (3, 4)])
        assert max_degree(g) == 3
        assert max_degree(g, region=[1, 4]) == 1
        with pytest.raises(ValueError):
            max_degree(g, region=[])


class TestEscapeVsGiant:
    def test_beta_zero_never_escapes(self):
        est = escape_vs_giant(make_params(beta=0.0), N=3, outer_N=6, n_samples=5, seed=1)
        assert est.frequency == 0.0
        assert est.n_conditioning == 5

    def test_outer_must_contain(self):
        with pytest.raises(ValueError):
            escape_vs_giant(make_params(), N=4, outer_N=4, n_samples=1, seed=0)

    def test_dense_regime_conditioning_fails(self):
        # with huge beta the origin is always in the giant component
        est = escape_vs_giant(make_params(beta=50.0), N=3, outer_N=6, n_samples=4, seed=2)
        assert est.frequency is None
        assert est.diagnostic is not None
