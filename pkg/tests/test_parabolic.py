import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hypac.diagnostics import energy_identity_residual, fit_decay_exponent
from hypac.model import ProblemParams, cubic_potential, indicial_roots
from hypac.parabolic import (BracketInvalid, EigenvectorUndefined, classify_fixed_points,
                             explicit_solution, explicit_solution_residual, fixed_point,
                             heteroclinic_profile, monotonicity_threshold, nonexistence_certificate,
                             profile_changes_sign, shoot_manifold, threshold_report)


def symbolic_residual(sign):
    """``x^2 u'' + (2-n) x u' - sign * k u (u^2 - 1)`` for ``u = x^a/(1+x^a)``, simplified."""
    x, n = sp.symbols("x n", positive=True)
    a = (n - 1) / 3
    k = 2 * (n - 1) ** 2 / 9
    u = x ** a / (1 + x ** a)
    expr = x ** 2 * sp.diff(u, x, 2) + (2 - n) * x * sp.diff(u, x) - sign * k * u * (u ** 2 - 1)
    return sp.simplify(expr), x, n


class TestExplicitSolution:
    def test_symbolic_oracle_consistent_sign(self):
        expr, _, _ = symbolic_residual(1)
        assert expr == 0

    def test_symbolic_oracle_flipped_sign(self):
        expr, x, n = symbolic_residual(-1)
        # the flipped convention leaves 2 k u (u^2 - 1)
        s = x ** ((n - 1) / 3)
        u = s / (1 + s)
        assert sp.simplify(expr - 2 * (2 * (n - 1) ** 2 / 9) * u * (u ** 2 - 1)) == 0

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 7])
    def test_residual(self, n):
        assert explicit_solution_residual(n) < 1e-10

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_flipped_sign_residual(self, n):
        k = 2 * (n - 1) ** 2 / 9
        # sup of 2 k |u (u^2 - 1)| over (0, 1), attained at u = 1/sqrt(3)
        expected = 2 * k * 2 / (3 * math.sqrt(3))
        assert explicit_solution_residual(n, sign=-1.0) == pytest.approx(expected, rel=1e-4)

    def test_values(self):
        assert explicit_solution(2, 1.0) == 0.5
        assert explicit_solution(4, 8.0) == pytest.approx(8 / 9)


class TestFixedPoints:
    def test_explicit_case(self, p22):
        fps = classify_fixed_points(p22)
        assert [f.location for f in fps] == [(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]
        origin = fps[1]
        assert origin.kind == "unstable_node"
        assert sorted(origin.eigenvalues) == pytest.approx(sorted(indicial_roots(2, 2 / 9)), abs=1e-15)
        for mu, e in zip(origin.eigenvalues, origin.eigenvectors):
            assert e[0] == 1.0 and e[1] == mu

    def test_spiral(self):
        origin = fixed_point(ProblemParams(2, cubic_potential(1.0)), 0.0)
        assert origin.kind == "unstable_spiral"
        with pytest.raises(EigenvectorUndefined):
            origin.unit_eigenvector("unstable")

    @given(st.integers(2, 8), st.floats(0.01, 20.0))
    def test_wells_are_saddles(self, n, k):
        p = ProblemParams(n, cubic_potential(k))
        for info in classify_fixed_points(p):
            for mu in info.eigenvalues:
                assert abs(mu * mu - (n - 1) * mu - float(p.potential.fprime(info.location[0]))) < 1e-12 * max(1, k, n * n)
            if info.location[0] != 0:
                assert info.kind == "saddle"
        expect = "unstable_node" if k <= (n - 1) ** 2 / 4 else "unstable_spiral"
        assert fixed_point(p, 0.0).kind == expect


class TestShooting:
    def test_unstable_branch_of_left_well(self, p22):
        o = shoot_manifold(p22, (-1.0, 0.0), "unstable_up")
        assert o.outcome == "passes_above" and o.outcome_value > 0

    def test_stable_branch_of_right_well(self, p22):
        o = shoot_manifold(p22, (1.0, 0.0), "stable_backward_down")
        assert o.outcome == "converges_to" and o.outcome_value == (0.0, 0.0)
        assert np.all(np.diff(o.xi) > 0)

    def test_offset_halving_is_translation(self, p22):
        tol = 1e-10
        a = heteroclinic_profile(p22, tol=tol, offset=1e-6)
        b = heteroclinic_profile(p22, tol=tol, offset=5e-7)
        xi = np.linspace(-30, 30, 601)
        d = np.max(np.abs(a.xi_profile.interpolant()(xi) - b.xi_profile.interpolant()(xi)))
        assert d < 10 * tol

    def test_offset_range(self, p22):
        with pytest.raises(ValueError):
            shoot_manifold(p22, (1.0, 0.0), "stable_backward_down", offset=1e-2)

    def test_no_homoclinic(self, p22):
        for branch in ("unstable_up", "unstable_down"):
            o = shoot_manifold(p22, (1.0, 0.0), branch)
            assert not (o.outcome == "converges_to" and o.outcome_value == (1.0, 0.0))

    @pytest.mark.parametrize("fp, branch", [((-1.0, 0.0), "unstable_up"), ((1.0, 0.0), "stable_backward_down"),
                                            ((1.0, 0.0), "unstable_up"), ((-1.0, 0.0), "unstable_down")])
    def test_orbit_energy_identity(self, p22, fp, branch):
        prof = shoot_manifold(p22, fp, branch, xi_span=60.0).to_profile()
        assert energy_identity_residual(prof) < 1e-5
        g = prof.grid
        for lo, hi in ((0.0, 0.3), (0.3, 0.7), (0.5, 1.0)):
            a, b = g[0] + lo * (g[-1] - g[0]), g[0] + hi * (g[-1] - g[0])
            assert energy_identity_residual(prof, a, b) < 1e-5

    def test_csv(self, p22, tmp_path):
        o = shoot_manifold(p22, (-1.0, 0.0), "unstable_up")
        o.to_csv(tmp_path / "o.csv")
        assert (tmp_path / "o.csv").read_text().splitlines()[0] == "xi,u,v"


class TestHeteroclinic:
    def test_matches_explicit(self, het22):
        x = het22.x_profile.grid
        assert np.max(np.abs(het22.x_profile.values - explicit_solution(2, x))) < 1e-6

    def test_normalisation(self, het22):
        i = int(np.nonzero(het22.xi_profile.grid == 0.0)[0][0])
        assert het22.xi_profile.values[i] == pytest.approx(0.5, abs=1e-12)

    def test_end_values(self, het22):
        v = het22.xi_profile.values
        assert abs(v[0]) < 1e-6 and abs(v[-1] - 1) < 1e-6

    def test_energy_identity(self, het22):
        assert energy_identity_residual(het22.xi_profile) < 1e-5

    def test_left_decay_rate(self, het22):
        fit = fit_decay_exponent(het22.xi_profile, (-40, -15), "to_zero")
        assert fit.rel_error(indicial_roots(2, 2 / 9)[0]) < 0.03

    def test_right_decay_rate(self, het22, p22):
        mu = min(fixed_point(p22, 1.0).eigenvalues)
        # the xi chart reports the signed slope of log|1 - u|, i.e. the eigenvalue itself
        fit = fit_decay_exponent(het22.xi_profile, (5, 25), "to_plus_one")
        assert abs(fit.exponent - mu) / abs(mu) < 0.03

    def test_tolerance_refinement(self, p22):
        a = heteroclinic_profile(p22, tol=1e-9)
        b = heteroclinic_profile(p22, tol=1e-11)
        xi = np.linspace(-30, 30, 601)
        d = np.max(np.abs(a.xi_profile.interpolant()(xi) - b.xi_profile.interpolant()(xi)))
        assert d < 10 * (1e-9 - 1e-11)

    def test_negated_connection(self, p22, het22):
        neg = heteroclinic_profile(p22, target=-1.0)
        xi = np.linspace(-30, 30, 601)
        d = np.max(np.abs(neg.xi_profile.interpolant()(xi) + het22.xi_profile.interpolant()(xi)))
        assert d < 1e-10

    def test_node_regime_monotone(self):
        het = heteroclinic_profile(ProblemParams(4, cubic_potential(2.0)))
        assert np.all(np.diff(het.xi_profile.values) >= 0)


class TestCertificate:
    @pytest.mark.parametrize("n, k", [(2, 2 / 9), (3, 1.0), (4, 2.0)])
    def test_passes_above(self, n, k):
        c = nonexistence_certificate(ProblemParams(n, cubic_potential(k)))
        assert c.certified and c.v_at_crossing > 0
        # F(-1) = F(1): the kinetic energy gained at u = 1 exceeds the dissipated amount
        assert c.dissipation < 0 < c.kinetic_change
        assert abs(c.potential_change) < 1e-10
        assert c.identity_residual < 1e-5

    def test_unbalanced_rejected(self):
        from hypac.model import custom_potential
        f = lambda s: np.asarray(s) * (np.asarray(s) ** 2 - 1) + 0.1 * (1 - np.asarray(s) ** 2)
        fp = lambda s: 3 * np.asarray(s) ** 2 - 1 - 0.2 * np.asarray(s)
        with pytest.raises(ValueError):
            nonexistence_certificate(ProblemParams(2, custom_potential(f, fp)))

    def test_report_dict(self, p22):
        d = nonexistence_certificate(p22).to_dict()
        assert d["outcome"] == "passes_above" and d["certified"] and d["offset"] == 1e-6


class TestThreshold:
    def test_small_k_positive(self):
        t = profile_changes_sign(2, 0.01)
        assert not t.negative and t.min_u > -1e-12

    def test_spiral_negative(self):
        t = profile_changes_sign(2, 0.3)
        assert t.spiral and t.negative

    def test_bisection(self):
        rep = threshold_report(2, tol_k=1e-3)
        lo, hi = rep.bracket
        assert 0 < rep.gamma <= 0.25 + 1e-3 and hi - lo <= 1e-3
        for t in rep.history:
            if t.k <= lo:
                assert not t.negative
            if t.k >= hi:
                assert t.negative

    def test_float_return(self):
        assert isinstance(monotonicity_threshold(2, tol_k=1e-2), float)

    def test_bracket_invalid(self):
        with pytest.raises(BracketInvalid):
            threshold_report(2, (0.01, 0.05))
        with pytest.raises(ValueError):
            threshold_report(2, tol_k=1e-8)
