"""Heat-kernel propagation and walk statistics against dense oracles."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from lrplab import walk
from lrplab.core import Box, LatticeGraph
from lrplab.sampler import PairPredicate, sample_edges
from lrplab.cluster import connected_components

from conftest import dense_transition, k2_lattice, make_params, random_connected_flat


class TestK2ClosedForms:
    def test_heat_kernel_row_continuous(self):
        g, comp = k2_lattice()
        for t in (0.0, 0.3, 1.0, 2.5):
            row = walk.heat_kernel_row_exact(g, comp, 0, t, mode="continuous")
            assert row[0] == pytest.approx((1 + math.exp(-2 * t)) / 2, abs=1e-12)
            assert row[1] == pytest.approx((1 - math.exp(-2 * t)) / 2, abs=1e-12)

    def test_psi_series_continuous(self):
        g, comp = k2_lattice()
        times = np.array([0.0, 0.25, 1.0, 3.0])
        s = walk.psi_series_exact(g, comp, 0, times, mode="continuous")
        # psi_t = P_2t(x,x)/deg(x) = (1 + e^{-4t})/2
        np.testing.assert_allclose(s.values, (1 + np.exp(-4 * times)) / 2, atol=1e-12)
        assert s.method == "uniformization"

    def test_discrete_alternation(self):
        g, comp = k2_lattice()
        s = walk.psi_series_exact(g, comp, 0, [0, 1, 2, 3], mode="discrete")
        # K2 is periodic: P_t(0,.) alternates, so psi_t = 1 at every t
        np.testing.assert_allclose(s.values, 1.0, atol=1e-15)


class TestDenseOracles:
    def test_discrete_matches_matrix_power(self, rng):
        for _ in range(6):
            g = random_connected_flat(int(rng.integers(3, 12)), rng)
            P, degs = dense_transition(g)
            comp = np.arange(g.n_vertices)
            x = int(rng.integers(0, g.n_vertices))
            Pt = np.eye(g.n_vertices)
            for t in range(7):
                row = walk.heat_kernel_row_exact(g, comp, x, t, mode="discrete")
                np.testing.assert_allclose(row, Pt[x], atol=1e-12)
                Pt = Pt @ P

    def test_continuous_matches_expm(self, rng):
        for _ in range(5):
            g = random_connected_flat(int(rng.integers(3, 12)), rng)
            P, degs = dense_transition(g)
            comp = np.arange(g.n_vertices)
            x = 0
            for t in (0.5, 2.0, 7.5):
                row = walk.heat_kernel_row_exact(g, comp, x, t, mode="continuous")
                oracle = expm(t * (P - np.eye(len(P))))[x]
                np.testing.assert_allclose(row, oracle, atol=1e-10)

    def test_psi_reversibility_identity(self, rng):
        # sum_y P_t(x,y)^2/deg(y) equals P_2t(x,x)/deg(x) computed directly
        for _ in range(5):
            g = random_connected_flat(int(rng.integers(3, 10)), rng)
            comp = np.arange(g.n_vertices)
            P, degs = dense_transition(g)
            x = int(rng.integers(0, g.n_vertices))
            for t in (1.0, 3.0):
                s = walk.psi_series_exact(g, comp, x, [t], mode="continuous")
                direct = expm(2 * t * (P - np.eye(len(P))))[x, x] / degs[x]
                assert s.values[0] == pytest.approx(direct, abs=1e-10)

    def test_rejects_isolated_vertex(self):
        box = Box(d=1, N=1)
        g = LatticeGraph(box, np.array([[0, 1]], dtype=np.int64))
        with pytest.raises(ValueError):
            walk.psi_series_exact(g, [0, 1, 2], 0, [1.0])

    def test_psi_monotone_and_convex_continuous(self, rng):
        g = random_connected_flat(15, rng)
        comp = np.arange(15)
        times = np.linspace(0.0, 10.0, 60)
        s = walk.psi_series_exact(g, comp, 0, times, mode="continuous")
        diffs = np.diff(s.values)
        assert (diffs <= 1e-12).all()
        assert (np.diff(diffs) >= -1e-10).all()


class TestMcCollision:
    def test_matches_exact_within_4_stderr(self, rng):
        hits = 0
        cases = 0
        for _ in range(10):
            g = random_connected_flat(int(rng.integers(3, 9)), rng)
            comp = np.arange(g.n_vertices)
            t = int(rng.integers(1, 4))
            exact = walk.psi_series_exact(g, comp, 0, [t], mode="discrete").values[0]
            mc = walk.psi_mc_collision(g, comp, 0, t, reps=20000, seed=int(rng.integers(1 << 30)))
            cases += 1
            err = mc.stderr[0] if mc.stderr[0] > 0 else 1e-12
            hits += abs(mc.values[0] - exact) <= 4 * max(err, 1e-9)
        assert hits >= 9

    def test_reps_validation(self):
        g, comp = k2_lattice()
        with pytest.raises(ValueError):
            walk.psi_mc_collision(g, comp, 0, 1, reps=0, seed=0)

    def test_deterministic(self):
        g, comp = k2_lattice()
        a = walk.psi_mc_collision(g, comp, 0, 3, reps=100, seed=5, mode="continuous")
        b = walk.psi_mc_collision(g, comp, 0, 3, reps=100, seed=5, mode="continuous")
        assert a.values[0] == b.values[0]


class TestSimulateWalk:
    def lrp_graph(self, N=64):
        box = Box(d=1, N=N, geometry="torus")
        params = make_params(geometry="torus")
        edges = sample_edges(box, PairPredicate(), params, seed=2)
        return LatticeGraph(box, edges)

    def test_discrete_counts_and_units(self):
        g = self.lrp_graph()
        lab = connected_components(g)
        x = int(lab.largest()[0])
        ws = walk.simulate_walk(g, x, 500, "discrete", seed=1)
        assert ws.n_moves == 500
        assert len(ws.increments) == 500
        assert (ws.increments >= 1).all()
        assert (np.diff(ws.running_max) >= 0).all()
        assert ws.jump_times is None

    def test_continuous_jump_times(self):
        g = self.lrp_graph()
        x = int(connected_components(g).largest()[0])
        ws = walk.simulate_walk(g, x, 30.0, "continuous", seed=3)
        assert ws.n_moves == len(ws.jump_times)
        assert (np.diff(ws.jump_times) > 0).all()
        assert ws.jump_times[-1] <= 30.0

    def test_isolated_start_flagged(self):
        box = Box(d=1, N=2)
        g = LatticeGraph(box, np.array([[0, 1]], dtype=np.int64))
        ws = walk.simulate_walk(g, 3, 10, "discrete", seed=0)
        assert ws.n_moves == 0
        assert ws.diagnostic is not None

    def test_deterministic(self):
        g = self.lrp_graph()
        x = int(connected_components(g).largest()[0])
        a = walk.simulate_walk(g, x, 200, "discrete", seed=7)
        b = walk.simulate_walk(g, x, 200, "discrete", seed=7)
        np.testing.assert_array_equal(a.increments, b.increments)


class TestPlateau:
    def test_psi_infinity_and_plateau(self):
        g, comp = k2_lattice()
        assert walk.psi_infinity(g, comp) == pytest.approx(0.5)
        times = np.array([0.1, 5.0])
        s = walk.psi_series_exact(g, comp, 0, times, mode="continuous")
        mask = walk.plateau_mask(s, 0.5)
        assert not mask[0] and mask[1]

    def test_universal_return_check(self):
        g, comp = k2_lattice()
        times = np.array([0.05, 0.1, 0.2])
        s = walk.psi_series_exact(g, comp, 0, times, mode="continuous")
        check = walk.universal_return_check(s, deg_x=1, psi_inf=0.5, C=4.0)
        assert check.passed
        assert check.n_checked == 3

    def test_return_check_rejects_mc(self):
        g, comp = k2_lattice()
        mc = walk.psi_mc_collision(g, comp, 0, 1, reps=10, seed=0)
        with pytest.raises(ValueError):
            walk.universal_return_check(mc, deg_x=1, psi_inf=0.5)


class TestEmpiricalTail:
    def test_exact_fractions(self):
        samples = np.array([1.0, 2.0, 3.0, 10.0])
        np.testing.assert_allclose(
            walk.empirical_tail(samples, [0.5, 2.5, 20.0]), [1.0, 0.5, 0.0]
        )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            walk.empirical_tail(np.array([]), [1.0])
