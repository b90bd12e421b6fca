import sys

import numpy as np
import pytest

from hypac.model import ProblemParams, cubic_potential


@pytest.fixture(scope="session")
def p22():
    """``n = 2`` with the cubic coefficient of the explicit connection."""
    return ProblemParams(2, cubic_potential(2 / 9))


@pytest.fixture(scope="session")
def p3_half():
    return ProblemParams(3, cubic_potential(0.5))


@pytest.fixture(scope="session")
def het22(p22):
    from hypac.parabolic import heteroclinic_profile
    return heteroclinic_profile(p22)


@pytest.fixture(scope="session")
def bvp22(p22):
    from hypac.hyperbolic import minimize_profile, newton_profile
    m = minimize_profile(p22, 20.0, 4000)
    nw = newton_profile(p22, 20.0, 4000, init="tanh")
    return m, nw


@pytest.fixture(scope="session")
def long_profile22(p22):
    """Wide-window connection used as the reference for disk comparisons."""
    from hypac.hyperbolic import newton_profile
    return newton_profile(p22, 25.0, 10000).profile


def synthetic(chart, grid, values, derivs=None, params=None):
    from hypac.diagnostics import Profile1D
    grid = np.asarray(grid, float)
    values = np.asarray(values, float)
    if derivs is None:
        derivs = np.gradient(values, grid)
    return Profile1D(chart, grid, values, derivs, params)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
