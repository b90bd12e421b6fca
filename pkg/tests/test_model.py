import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypac.model import (ComplexRootsError, PotentialSpec, ProblemParams, cubic_potential, custom_potential,
                         indicial_roots, lipschitz_on_interval, potential_from_csv, root_chain_check,
                         validate_potential)


def quadratic_roots(n, mu):
    # textbook formula, independent of the cancellation-free implementation
    d = math.sqrt((n - 1) ** 2 - 4 * mu)
    return ((n - 1) - d) / 2, ((n - 1) + d) / 2


class TestCubic:
    def test_value(self):
        assert cubic_potential(1.0).f(0.5) == -0.375

    def test_constants(self):
        p = cubic_potential(1.0)
        assert p.lam == 1.0 and p.lipschitz == 2.0

    @pytest.mark.parametrize("k", [0.01, 0.3, 2.0])
    def test_zeros(self, k):
        f = cubic_potential(k).f
        assert f(1.0) == 0 and f(-1.0) == 0 and f(0.0) == 0

    @pytest.mark.parametrize("k", [0.0, -1.0])
    def test_rejects_nonpositive(self, k):
        with pytest.raises(ValueError):
            cubic_potential(k)

    @pytest.mark.parametrize("k", [0.01, 0.1, 1.0, 10.0])
    def test_validates(self, k):
        assert validate_potential(cubic_potential(k)).passed

    @given(st.floats(0.01, 10.0), st.floats(-3.0, 3.0))
    def test_antiderivative(self, k, u):
        p = cubic_potential(k)
        h = 1e-6
        assert abs((p.F(u + h) - p.F(u - h)) / (2 * h) - p.f(u)) < 1e-5 * max(1.0, k * u ** 2 * abs(u))


class TestValidation:
    def test_shifted_F_fails_zero_set(self):
        c = cubic_potential(1.0)
        bad = PotentialSpec(c.f, lambda u: (u * u - 1) ** 2 + 0.1, c.fprime, 1.0, 2.0)
        rep = validate_potential(bad)
        assert not rep["F(+-1)=0"].passed
        assert "F(+-1)=0" in rep.failed()

    def test_flipped_sign_fails_fprime0(self):
        k = 1.0
        f = lambda u: k * u * (1 - u * u)
        fp = lambda u: k * (1 - 3 * u * u)
        spec = custom_potential(f, fp, F=lambda u: -0.25 * k * (u * u - 1) ** 2)
        rep = validate_potential(spec)
        assert not rep["f'(0)<0"].passed

    def test_min_samples(self):
        with pytest.raises(ValueError):
            validate_potential(cubic_potential(1.0), samples=50)


class TestLipschitz:
    @pytest.mark.parametrize("k, L", [(2 / 9, 4 / 9), (1.0, 2.0)])
    def test_cubic_closed_form(self, k, L):
        assert cubic_potential(k).lipschitz == pytest.approx(L, abs=1e-15)

    @pytest.mark.parametrize("k", [2 / 9, 1.0])
    def test_sampled_matches_closed_form(self, k):
        c = cubic_potential(k)
        spec = custom_potential(c.f, c.fprime, c.F)
        assert lipschitz_on_interval(spec) == pytest.approx(2 * k, abs=1e-6)

    def test_linear(self):
        spec = custom_potential(lambda u: -u, lambda u: -np.ones_like(np.asarray(u, float)),
                                F=lambda u: 0.5 * (1 - np.asarray(u) ** 2))
        assert lipschitz_on_interval(spec) == pytest.approx(1.0, abs=1e-12)

    def test_interior_maximum(self):
        # |f'| = |cos(3u)| peaks at u = 0 and u = +-pi/3
        f = lambda u: np.sin(3 * np.asarray(u)) / 3
        fp = lambda u: np.cos(3 * np.asarray(u))
        spec = PotentialSpec(f, f, fp, -1.0, 1.0)
        assert lipschitz_on_interval(spec, 1001) == pytest.approx(1.0, abs=1e-9)


class TestIndicialRoots:
    def test_explicit_case(self):
        am, ap = indicial_roots(2, 2 / 9)
        assert am == pytest.approx(1 / 3, abs=1e-15) and ap == pytest.approx(2 / 3, abs=1e-15)

    def test_double_root(self):
        assert indicial_roots(4, 9 / 4) == pytest.approx((1.5, 1.5), abs=1e-15)

    def test_n3(self):
        assert indicial_roots(3, 0.75) == pytest.approx((0.5, 1.5), abs=1e-15)

    def test_complex(self):
        with pytest.raises(ComplexRootsError) as e:
            indicial_roots(2, 1.0)
        assert e.value.disc == pytest.approx(-3.0)

    @settings(max_examples=200)
    @given(st.integers(2, 12), st.floats(1e-6, 1.0))
    def test_quadratic_and_vieta(self, n, frac):
        mu = frac * (n - 1) ** 2 / 4
        am, ap = indicial_roots(n, mu)
        for a in (am, ap):
            assert abs(a * a - (n - 1) * a + mu) < 1e-10
        assert abs(am + ap - (n - 1)) <= 1e-12 * (n - 1)
        assert abs(am * ap - mu) <= 1e-12 * max(mu, 1.0)
        assert 0 < am <= ap < n - 1

    @given(st.integers(2, 8), st.floats(0.05, 1.0))
    def test_matches_textbook_formula(self, n, frac):
        mu = frac * (n - 1) ** 2 / 4
        assert indicial_roots(n, mu) == pytest.approx(quadratic_roots(n, mu), rel=1e-9, abs=1e-12)


class TestRootChain:
    def test_boundary_case_not_applicable(self):
        rep = root_chain_check(ProblemParams(3, cubic_potential(1.0)))
        assert rep.roots.alpha_minus == pytest.approx(1.0) and rep.roots.alpha_plus == pytest.approx(1.0)
        assert rep.roots.beta_minus is None
        assert not rep.applicable and not rep.holds

    def test_n10(self):
        rep = root_chain_check(ProblemParams(10, cubic_potential(2.0)))
        assert rep.holds
        assert rep.roots.alpha_minus == pytest.approx((9 - math.sqrt(73)) / 2, abs=1e-12)
        assert rep.roots.beta_minus == pytest.approx((9 - math.sqrt(65)) / 2, abs=1e-12)

    def test_equal_constants(self):
        from dataclasses import replace
        spec = replace(cubic_potential(0.1), lipschitz=0.1)
        rep = root_chain_check(ProblemParams(2, spec))
        assert rep.roots.alpha_minus == rep.roots.beta_minus
        assert rep.roots.alpha_plus == rep.roots.beta_plus

    @given(st.integers(2, 10), st.floats(0.01, 1.0), st.floats(0.0, 1.0))
    def test_chain_holds_when_applicable(self, n, a, b):
        from dataclasses import replace
        top = (n - 1) ** 2 / 4
        lam = a * top
        L = lam + b * (top - lam)
        rep = root_chain_check(ProblemParams(n, replace(cubic_potential(lam), lipschitz=L)))
        assert rep.applicable and rep.holds


class TestCsv:
    def test_round_trip_cubic(self, tmp_path):
        c = cubic_potential(0.5)
        s = np.linspace(-1.5, 1.5, 301)
        path = tmp_path / "pot.csv"
        np.savetxt(path, np.column_stack([s, c.f(s), c.fprime(s)]), delimiter=",",
                   header="s,f,fprime", comments="")
        spec = potential_from_csv(path)
        u = np.linspace(-1.2, 1.2, 97)
        assert np.max(np.abs(spec.f(u) - c.f(u))) < 1e-6
        assert np.max(np.abs(spec.F(u) - c.F(u))) < 1e-6
        assert spec.lam == pytest.approx(0.5, abs=1e-4)
        assert validate_potential(spec).passed

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u,f,df\n0,0,0\n")
        with pytest.raises(ValueError):
            potential_from_csv(path)

    def test_custom_F_by_quadrature(self):
        c = cubic_potential(1.0)
        spec = custom_potential(c.f, c.fprime)
        u = np.array([-0.7, 0.0, 0.3, 1.0])
        assert np.max(np.abs(spec.F(u) - c.F(u))) < 1e-10


def test_params_reject_small_n():
    with pytest.raises(ValueError):
        ProblemParams(1, cubic_potential(1.0))
