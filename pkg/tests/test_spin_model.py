"""Schedule, Hamiltonian, and gap-structure tests.

Derived expectations are frozen from independent oracles (dense
eigensolves, scan + brentq root finding); the generating snippets are
kept next to the frozen numbers.
"""

import numpy as np
import pytest

from fluxgate.spin_model import (
    GapRootError,
    SpinParams,
    find_s_star,
    gap_approx,
    gap_exact,
    gap_tilde,
    hamiltonian,
    schedule_eval,
    spectrum_trace,
)

P = SpinParams()

# oracle: 1e4-point scan of gap_tilde + scipy.optimize.brentq (xtol=1e-15)
S_STAR_ORACLE = 0.6374949955185049
GAP_MIN2_ORACLE = 0.04350060053777942


class TestSpinParams:
    def test_defaults_satisfy_invariants(self):
        assert 0 < P.h1z < P.h2z
        assert P.h1z < P.J < P.h2z
        assert 0 < P.h1x < P.h2x
        assert 0 < P.s1 < 1
        assert 0 < P.dmin1 < 2 * P.h1x

    @pytest.mark.parametrize("kw", [
        dict(h1z=0.0), dict(h1z=2.5), dict(J=0.2), dict(J=2.5),
        dict(h1x=1.5), dict(s1=0.0), dict(s1=1.0),
        dict(dmin1=0.0), dict(dmin1=0.2), dict(h1z=0.5, J=0.5),
    ])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            SpinParams(**kw)

    def test_degenerate_h1x_zero_requires_dmin1_zero(self):
        SpinParams(h1x=0.0, dmin1=0.0)
        with pytest.raises(ValueError):
            SpinParams(h1x=0.0, dmin1=0.01)


class TestSchedule:
    def test_endpoints(self):
        g0 = schedule_eval(P, 0.0)
        assert (g0.gd1, g0.gd2, g0.gp) == (1.0, 1.0, 0.0)
        g1 = schedule_eval(P, 1.0)
        assert (g1.gd1, g1.gd2, g1.gp) == (-0.0, -0.0, 1.0)

    def test_first_gap_value_at_s1(self):
        g = schedule_eval(P, P.s1)
        assert g.gd1 == pytest.approx(P.dmin1 / (2 * P.h1x), abs=1e-15)
        assert g.gd2 == 1.0 and g.gp == 0.0

    def test_domain_error(self):
        for s in (-0.01, 1.01):
            with pytest.raises(ValueError):
                schedule_eval(P, s)

    def test_piecewise_formulas_on_grid(self):
        # direct re-evaluation of the two closed-form segments
        r = P.dmin1 / (2 * P.h1x)
        for s in np.linspace(0.0, 1.0, 1001):
            g = schedule_eval(P, s)
            if s <= P.s1:
                expect = ((r - 1) * s / P.s1 + 1, 1.0, 0.0)
            else:
                expect = (r * (s - 1) / (P.s1 - 1), (s - 1) / (P.s1 - 1),
                          (s - P.s1) / (1 - P.s1))
            assert np.allclose((g.gd1, g.gd2, g.gp), expect, rtol=1e-15,
                               atol=1e-15)

    def test_continuity_at_s1(self):
        lo = schedule_eval(P, P.s1 - 1e-9)
        hi = schedule_eval(P, P.s1 + 1e-9)
        for a, b in ((lo.gd1, hi.gd1), (lo.gd2, hi.gd2), (lo.gp, hi.gp)):
            assert abs(a - b) < 1e-8

    def test_monotonicity(self):
        s = np.linspace(0.0, 1.0, 2001)
        gd1 = np.array([schedule_eval(P, x).gd1 for x in s])
        gp = np.array([schedule_eval(P, x).gp for x in s])
        assert np.all(np.diff(gd1) <= 1e-15)
        assert np.all(np.diff(gp) >= -1e-15)


class TestHamiltonian:
    def test_diagonal_at_final_time(self):
        h = hamiltonian(P, 1.0)
        expect = np.diag([P.h1z + P.h2z + P.J, P.h1z - P.h2z - P.J,
                          -P.h1z + P.h2z - P.J, -P.h1z - P.h2z + P.J])
        np.testing.assert_allclose(h, expect, atol=1e-15)

    def test_driver_spectrum_at_start(self):
        evals = np.linalg.eigvalsh(hamiltonian(P, 0.0))
        expect = np.sort([P.h1x + P.h2x, P.h1x - P.h2x,
                          -P.h1x + P.h2x, -P.h1x - P.h2x])
        np.testing.assert_allclose(evals, expect, atol=1e-14)

    @pytest.mark.parametrize("s", [0.0, 0.2, 0.5, 0.7, 1.0])
    def test_hermitian(self, s):
        h = hamiltonian(P, s)
        assert np.abs(h - h.conj().T).max() == 0.0

    def test_matches_schedule_reassembly(self):
        # independent assembly straight from the schedule values
        sx = np.array([[0, 1], [1, 0]])
        sz = np.diag([1, -1])
        eye = np.eye(2)
        for s in np.linspace(0, 1, 101):
            g = schedule_eval(P, s)
            direct = (g.gd1 * P.h1x * np.kron(sx, eye)
                      + g.gd2 * P.h2x * np.kron(eye, sx)
                      + g.gp * (P.h1z * np.kron(sz, eye)
                                + P.h2z * np.kron(eye, sz)
                                + P.J * np.kron(sz, sz)))
            np.testing.assert_allclose(hamiltonian(P, s), direct,
                                       atol=1e-15)


class TestGaps:
    def test_gap_exact_endpoints(self):
        assert gap_exact(P, 0.0) == pytest.approx(2 * P.h1x, abs=1e-12)
        assert gap_exact(P, P.s1) == pytest.approx(P.dmin1, abs=1e-12)
        # derived: order the four diagonal entries at s = 1 and subtract
        assert gap_exact(P, 1.0) == pytest.approx(2 * (P.J - P.h1z),
                                                  abs=1e-12)

    def test_segment_one_gap_law(self):
        for s in np.linspace(0.0, P.s1, 301):
            g = schedule_eval(P, s)
            assert abs(gap_exact(P, s) - 2 * g.gd1 * P.h1x) < 1e-10

    def test_gap_tilde_domain(self):
        for s in (0.0, P.s1):
            with pytest.raises(ValueError):
                gap_tilde(P, s)

    def test_gap_tilde_endpoints(self):
        assert gap_tilde(P, 1.0) == pytest.approx(2 * (P.J - P.h1z),
                                                  abs=1e-14)
        val = gap_tilde(P, P.s1 + 1e-9)
        assert -1e-8 < val < 0.0

    def test_gap_approx_at_final_time(self):
        assert gap_approx(P, 1.0) == pytest.approx(
            abs(gap_tilde(P, 1.0)), abs=1e-14)

    def test_find_s_star_root(self):
        rep = find_s_star(P)
        assert P.s1 < rep.s_star <= 1.0
        assert abs(gap_tilde(P, rep.s_star)) < 1e-12
        assert rep.s_star == pytest.approx(S_STAR_ORACLE, abs=1e-9)
        assert rep.gap_min2 == pytest.approx(GAP_MIN2_ORACLE, rel=1e-9)

    def test_gap_min2_is_small_gap_approximation(self):
        rep = find_s_star(P)
        g = schedule_eval(P, rep.s_star)
        assert rep.gap_min2 == pytest.approx(2 * g.gd1 * P.h1x, rel=1e-10)

    def test_approx_vs_exact_near_crossing(self):
        rep = find_s_star(P)
        for s in np.linspace(rep.s_star - 0.05, rep.s_star + 0.05, 21):
            exact = gap_exact(P, s)
            assert abs(gap_approx(P, s) - exact) / exact < 0.05

    def test_second_gap_agreement_small_ratio(self):
        rep = find_s_star(P)
        exact = gap_exact(P, rep.s_star)
        assert abs(exact - rep.gap_min2) / exact < 0.02

    def test_approx_error_decreases_with_drive_ratio(self):
        # h1x/h2x -> 0 with other params fixed: sweep h2x upward
        errs = []
        for ratio in (0.1, 0.05, 0.01):
            q = SpinParams(h2x=P.h1x / ratio)
            rep = find_s_star(q)
            exact = gap_exact(q, rep.s_star)
            errs.append(abs(exact - rep.gap_min2) / exact)
        assert errs[0] > errs[1] > errs[2]

    def test_no_sign_change_reports_bracket(self):
        # h1x = 0 keeps gamma_d1 coefficients zero; an artificial
        # parameter set with J barely above h1z still crosses, so force
        # the degenerate failure by evaluating on a sub-bracket: easier
        # to build a params set whose tilde gap stays positive is not
        # possible under the invariants, so check the scan error path
        # via monkeypatched tilde values instead.
        import fluxgate.spin_model as sm
        orig = sm.gap_tilde
        try:
            sm.gap_tilde = lambda params, s: 1.0
            with pytest.raises(GapRootError) as info:
                find_s_star(P)
            assert info.value.bracket[0] > P.s1
        finally:
            sm.gap_tilde = orig


class TestSpectrumTrace:
    def test_single_point_grids(self):
        t0 = spectrum_trace(P, np.array([0.0]))
        expect = np.sort([-P.h1x - P.h2x, P.h1x - P.h2x,
                          -P.h1x + P.h2x, P.h1x + P.h2x])
        np.testing.assert_allclose(t0[0, 1:], expect, atol=1e-14)
        t1 = spectrum_trace(P, np.array([1.0]))
        np.testing.assert_allclose(
            t1[0, 1:], np.sort(np.diag(hamiltonian(P, 1.0)).real),
            atol=1e-14)

    def test_two_local_minima(self):
        table = spectrum_trace(P, np.linspace(0.0, 1.0, 4001))
        gap = table[:, 2] - table[:, 1]
        d = np.diff(gap)
        n_min = int(np.sum((d[:-1] < 0) & (d[1:] > 0)))
        assert n_min == 2

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            spectrum_trace(P, np.array([0.5, 0.2]))
        with pytest.raises(ValueError):
            spectrum_trace(P, np.array([]))
