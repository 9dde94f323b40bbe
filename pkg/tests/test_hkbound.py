"""Assumption checks, escape probabilities, and the closed-form decay bound."""

import math

import numpy as np
import pytest

from lrplab import hkbound, walk
from lrplab.hkbound import (
    BoundParams,
    TimeScaleRow,
    bound_curve,
    check_assumptions,
    escape_probability,
    escape_vector,
    fit_constants,
    verify_differential_inequality,
)

from conftest import k2_lattice


def k2_series(n_points=200, t_max=3.0, t_min=0.05):
    times = np.linspace(t_min, t_max, n_points)
    values = (1 + np.exp(-4 * times)) / 2
    return walk.PsiSeries(x=0, times=times, values=values, method="uniformization")


def kn_rows(s_values, n=8):
    # one part = K_n: gap = n/(n-1) > 1, volume n, degree ratio 1
    return [
        TimeScaleRow(
            s=float(s), lambda_s=1.0, V_s=float(n), gap_min=n / (n - 1),
            vol_min=float(n), vol_max=float(n), delta_ratio=1.0,
            escape_sup=0.0, psi_s=0.9 * math.log(n) / n * 4,
        )
        for s in s_values
    ]


class TestBoundParams:
    def test_delta_pinned(self):
        p = BoundParams(gamma=0.5, delta1_tilde=0.25, delta2_tilde=0.75)
        assert p.delta == 2.0 + 0.25 + 0.75 + 0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            BoundParams(gamma=0.0)
        with pytest.raises(ValueError):
            BoundParams(gamma=1.0, delta1_tilde=-0.1)
        with pytest.raises(ValueError):
            BoundParams(gamma=1.0, c2=0.0)
        with pytest.raises(ValueError):
            BoundParams(gamma=1.0, T1=5.0, T2=5.0)


class TestCheckAssumptions:
    def test_degenerate_kn_all_pass(self):
        params = BoundParams(gamma=0.5, c1=0.5, C1=2.0, c2=0.5, c3=0.5, C3=1.0, C4=100.0, T1=1, T2=4)
        checks = check_assumptions(kn_rows([1.0, 2.0, 4.0]), params)
        assert set(checks) == {
            "gap_floor", "volume_window", "linkage", "degree_ratio", "escape", "calibration",
        }
        assert all(c.ok for c in checks.values()), {k: c.margin for k, c in checks.items()}

    def test_forced_gap_failure(self):
        rows = kn_rows([1.0, 2.0])
        rows = [r.__class__(**{**r.__dict__, "lambda_s": 5.0}) for r in rows]
        params = BoundParams(gamma=0.5, c2=1e-6, C4=1e6)
        checks = check_assumptions(rows, params)
        assert not checks["gap_floor"].ok
        assert checks["gap_floor"].margin < 0

    def test_schedule_shape_validation(self):
        params = BoundParams(gamma=0.5)
        rows = kn_rows([2.0, 1.0])
        with pytest.raises(ValueError):
            check_assumptions(rows, params)
        with pytest.raises(ValueError):
            check_assumptions([], params)


class TestEscape:
    def test_k2_closed_form(self):
        g, comp = k2_lattice()
        mask = np.array([True, False, False])  # region {0}
        for t in (0.5, 1.0, 2.0):
            e = escape_probability(g, comp, mask, 0, t, mode="continuous")
            assert e == pytest.approx(1 - math.exp(-t), abs=1e-10)

    def test_full_region_no_escape(self):
        g, comp = k2_lattice()
        mask = np.array([True, True, False])
        e = escape_probability(g, comp, mask, 0, 2.0, mode="continuous")
        assert e == pytest.approx(0.0, abs=1e-9)

    def test_start_outside_region(self):
        g, comp = k2_lattice()
        mask = np.array([False, True, False])
        assert escape_probability(g, comp, mask, 0, 1.0) == 1.0

    def test_vector_matches_single(self):
        g, comp = k2_lattice()
        mask = np.array([True, False, False])
        vec = escape_vector(g, comp, mask, 1.5, mode="continuous")
        single = escape_probability(g, comp, mask, 0, 1.5, mode="continuous")
        assert vec[0] == pytest.approx(single, abs=1e-12)
        assert vec[1] == 1.0  # outside the region

    def test_discrete_mode(self):
        g, comp = k2_lattice()
        mask = np.array([True, False, False])
        # discrete: the walk leaves {0} on the first step surely
        assert escape_probability(g, comp, mask, 0, 1, mode="discrete") == pytest.approx(1.0)
        assert escape_probability(g, comp, mask, 0, 0, mode="discrete") == pytest.approx(0.0)


class TestDifferentialInequality:
    def params(self):
        # K2: -psi' = 2 e^{-4t} = 4 (psi - 1/2); with lambda=2, Delta=1 the
        # rhs is 2 (psi - (1+C3) log2 / 2) <= lhs as long as C3 >= 0.443
        return BoundParams(gamma=1.0, C3=0.5, T1=0.1, T2=6.0)

    def test_k2_analytic_case_passes(self):
        s = k2_series(400)
        n = len(s.times)
        rep = verify_differential_inequality(
            s, np.full(n, 2.0), np.full(n, 1.0), np.full(n, 2.0), self.params()
        )
        assert rep.pass_fraction == 1.0
        assert not rep.needs_refinement

    def test_coarse_grid_triggers_refinement(self):
        s = k2_series(24)
        n = len(s.times)
        rep = verify_differential_inequality(
            s, np.full(n, 2.0), np.full(n, 1.0), np.full(n, 2.0), self.params()
        )
        assert rep.needs_refinement

    def test_too_small_c3_fails_at_plateau(self):
        s = k2_series(400, t_max=6.0)
        n = len(s.times)
        rep = verify_differential_inequality(
            s, np.full(n, 2.0), np.full(n, 1.0), np.full(n, 2.0),
            BoundParams(gamma=1.0, C3=1e-6, T1=0.1, T2=12.0),
        )
        assert rep.pass_fraction < 1.0
        assert rep.failures

    def test_rejects_mc_series(self):
        s = k2_series(10)
        s.method = "mc_collision"
        with pytest.raises(ValueError):
            verify_differential_inequality(
                s, np.ones(10), np.ones(10), np.ones(10), self.params()
            )

    def test_grid_alignment_required(self):
        s = k2_series(10)
        with pytest.raises(ValueError):
            verify_differential_inequality(
                s, np.ones(9), np.ones(10), np.ones(10), self.params()
            )


class TestBoundCurve:
    def test_degenerate_formula(self):
        # gamma=1, delta=0, C5=C6=1, T1=0: psi_bar = min(1, 1/(1+t))
        p = BoundParams(gamma=1.0, C5=1.0, C6=1.0, T1=0.0, T2=20.0)
        curve = bound_curve(p, psi_T1=1.0, n_points=101, delta=0.0)
        np.testing.assert_allclose(curve.psi_bar, 1.0 / (1.0 + curve.times), atol=1e-12)

    def test_min_dominance(self):
        p = BoundParams(gamma=1.0, C5=100.0, C6=1.0, T1=0.0, T2=4.0)
        curve = bound_curve(p, psi_T1=0.01, delta=0.0)
        np.testing.assert_allclose(curve.psi_bar, 0.01, atol=1e-15)

    def test_log_branch_uses_min_near_start(self):
        # with delta > 0 the second branch blows up at t = T1/2; the min
        # must keep the psi_T1 branch there
        p = BoundParams(gamma=1.0, delta1_tilde=0.0, C5=1.0, C6=1.0, T1=2.0, T2=40.0)
        curve = bound_curve(p, psi_T1=0.7)
        assert curve.psi_bar[0] == pytest.approx(0.7)
        assert np.isfinite(curve.psi_bar).all()

    def test_u_transform_consistency(self):
        p = BoundParams(gamma=0.75, C5=2.0, C6=0.5, T1=1.0, T2=30.0)
        curve = bound_curve(p, psi_T1=0.9)
        np.testing.assert_allclose(curve.u ** (-1.0 / p.gamma), curve.psi_bar, rtol=1e-12)

    def test_monotone_after_crossover(self):
        p = BoundParams(gamma=1.0, C5=1.0, C6=1.0, T1=0.0, T2=50.0)
        curve = bound_curve(p, psi_T1=1.0, delta=0.0)
        assert curve.monotone_after_crossover

    def test_needs_fitted_constants(self):
        with pytest.raises(ValueError):
            bound_curve(BoundParams(gamma=1.0), psi_T1=1.0)


class TestFitConstants:
    def test_majorizes_series(self):
        s = k2_series(200, t_max=10.0)
        base = BoundParams(gamma=1.0, T1=0.1, T2=20.0)
        fitted = fit_constants(s, base)
        assert fitted.C5 is not None
        curve = bound_curve(fitted, psi_T1=float(s.values[0]))
        interp = np.interp(curve.times, s.times, s.values)
        assert (interp <= curve.psi_bar + 1e-9).all()

    def test_c5_minimal(self):
        s = k2_series(200, t_max=10.0)
        base = BoundParams(gamma=1.0, T1=0.1, T2=20.0)
        fitted = fit_constants(s, base)
        shrunk = fitted.__class__(**{**fitted.__dict__, "C5": fitted.C5 * 0.99})
        curve = bound_curve(shrunk, psi_T1=1.0)
        interp = np.interp(curve.times, s.times, s.values)
        assert (interp > curve.psi_bar + 1e-12).any()

    def test_grid_must_intersect_window(self):
        s = k2_series(50, t_max=0.5, t_min=0.01)
        with pytest.raises(ValueError):
            fit_constants(s, BoundParams(gamma=1.0, T1=2.0, T2=4.0))
