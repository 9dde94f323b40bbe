"""Core geometry, parameters, and graph container."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrplab.core import (
    Box,
    LatticeGraph,
    LrpParams,
    build_graph,
    canonical_torus_displacement,
    connection_probability,
    displacement_class,
    flat_graph,
)

from conftest import make_params


class TestDisplacementClass:
    def test_examples(self):
        assert displacement_class((3, -1, 0)) == (0, 1, 3)
        assert displacement_class((-2,)) == (2,)

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=4))
    def test_invariance_under_symmetry(self, dx):
        cls = displacement_class(dx)
        assert cls == displacement_class([-c for c in dx])
        assert cls == displacement_class(list(reversed(dx)))
        assert cls == tuple(sorted(cls))


class TestLrpParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            make_params(d=0)
        with pytest.raises(ValueError):
            make_params(s=1.0, d=1)  # s must exceed d
        with pytest.raises(ValueError):
            make_params(beta=-0.1)
        with pytest.raises(ValueError):
            make_params(L=-1)
        with pytest.raises(ValueError):
            LrpParams(d=1, s=1.5, beta=1.0, geometry="klein-bottle")
        with pytest.raises(ValueError):
            make_params(L=2, short_range={(1,): 1.5})
        with pytest.raises(ValueError):
            make_params(L=2, short_range={(-1,): 0.5})  # non-canonical key

    def test_short_range_accepts_canonical_keys(self):
        p = make_params(d=2, s=2.5, L=2, short_range={(0, 1): 0.9, (1, 1): 0.5})
        assert p.short_range[(0, 1)] == 0.9


class TestConnectionProbability:
    def test_long_range_formula(self):
        p = make_params(s=1.5, beta=2.0)
        r = 5.0
        assert connection_probability(p, (5,)) == pytest.approx(
            1.0 - math.exp(-2.0 * r**-1.5), abs=1e-15
        )

    def test_beta_zero_gives_zero(self):
        p = make_params(beta=0.0)
        assert connection_probability(p, (3,)) == 0.0

    def test_short_range_lookup_and_default(self):
        p = make_params(d=2, s=2.5, L=2, short_range={(0, 1): 0.75})
        assert connection_probability(p, (0, -1)) == 0.75
        assert connection_probability(p, (1, 0)) == 0.75
        # class (1,1) not in the table: probability 0 below the cutoff
        assert connection_probability(p, (1, 1)) == 0.0
        # at or above the cutoff the tail formula applies
        assert connection_probability(p, (2, 0)) == pytest.approx(
            1.0 - math.exp(-(2.0**-p.s)), abs=1e-15
        )

    def test_zero_displacement_rejected(self):
        p = make_params()
        with pytest.raises(ValueError):
            connection_probability(p, (0,))

    def test_torus_needs_scale(self):
        p = make_params(geometry="torus")
        with pytest.raises(ValueError):
            connection_probability(p, (1,))

    def test_torus_canonicalization(self):
        p = make_params(geometry="torus")
        # on the torus of side 2N+1 = 9, displacement 8 is really -1
        assert connection_probability(p, (8,), N=4) == connection_probability(
            make_params(), (1,)
        )

    def test_symmetric_in_dx(self):
        p = make_params(d=2, s=2.5)
        assert connection_probability(p, (3, -4)) == connection_probability(p, (-3, 4))


class TestCanonicalTorusDisplacement:
    def test_reduction(self):
        assert canonical_torus_displacement((8,), 4) == (-1,)
        assert canonical_torus_displacement((-5, 4), 4) == (4, 4)
        assert canonical_torus_displacement((0,), 4) == (0,)

    @given(st.integers(-100, 100), st.integers(1, 10))
    def test_range_and_congruence(self, c, N):
        (r,) = canonical_torus_displacement((c,), N)
        side = 2 * N + 1
        assert -N <= r <= N
        assert (r - c) % side == 0


class TestBox:
    @given(st.integers(1, 3), st.integers(0, 6))
    @settings(max_examples=40)
    def test_coord_index_roundtrip(self, d, N):
        box = Box(d=d, N=N)
        idx = np.arange(box.n_vertices)
        coords = box.index_to_coord(idx)
        assert coords.min() >= -N and coords.max() <= N
        np.testing.assert_array_equal(box.coord_to_index(coords), idx)

    def test_row_major_order(self):
        box = Box(d=2, N=1)
        # first vertex is the low corner, last is the high corner
        np.testing.assert_array_equal(box.index_to_coord(0), [-1, -1])
        np.testing.assert_array_equal(box.index_to_coord(box.n_vertices - 1), [1, 1])
        np.testing.assert_array_equal(box.index_to_coord(1), [-1, 0])

    def test_out_of_range_rejected(self):
        box = Box(d=1, N=2)
        with pytest.raises(ValueError):
            box.coord_to_index([3])
        with pytest.raises(ValueError):
            box.index_to_coord(5)

    def test_pair_displacement_torus(self):
        box = Box(d=1, N=2, geometry="torus")
        u = box.coord_to_index([-2])
        v = box.coord_to_index([2])
        assert box.pair_displacement(int(u), int(v)) == (-1,)


class TestLatticeGraph:
    def test_canonicalization(self):
        box = Box(d=1, N=2)
        g = LatticeGraph(box, [[1, 0], [0, 1], [3, 4]])
        np.testing.assert_array_equal(g.edges, [[0, 1], [3, 4]])
        assert g.n_edges == 2
        np.testing.assert_array_equal(g.degrees, [1, 1, 0, 1, 1])

    def test_rejects_self_loops_and_out_of_range(self):
        box = Box(d=1, N=1)
        with pytest.raises(ValueError):
            LatticeGraph(box, [[1, 1]])
        with pytest.raises(ValueError):
            LatticeGraph(box, [[0, 3]])

    def test_neighbors_sorted_symmetric(self):
        g = flat_graph(5, [(0, 3), (0, 1), (3, 1), (2, 4)])
        np.testing.assert_array_equal(g.neighbors(0), [1, 3])
        np.testing.assert_array_equal(g.neighbors(3), [0, 1])
        A = g.to_sparse().toarray()
        np.testing.assert_array_equal(A, A.T)
        assert A.diagonal().sum() == 0

    def test_induced_subgraph(self):
        g = flat_graph(6, [(0, 1), (1, 2), (2, 3), (4, 5), (1, 4)])
        sub, origin = g.induced_subgraph([1, 2, 4, 5])
        np.testing.assert_array_equal(origin, [1, 2, 4, 5])
        got = {tuple(e) for e in sub.edges}
        assert got == {(0, 1), (0, 2), (2, 3)}
        assert sub.n_vertices == 4

    def test_build_graph_records_params(self):
        box = Box(d=1, N=1)
        p = make_params()
        g = build_graph(box, [[0, 1]], p)
        assert g.provenance["params"] is p

    def test_empty_graph(self):
        g = flat_graph(4, [])
        assert g.n_edges == 0
        assert g.degrees.sum() == 0
        np.testing.assert_array_equal(g.neighbors(2), [])
