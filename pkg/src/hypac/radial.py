"""Radial (rotation-invariant) solutions ``u'' + (n-1) coth(r) u' = f(u)``.

The regular solution with ``u(0) = a``, ``u'(0) = 0`` is started slightly
off the singular point from its Taylor series and integrated with an
adaptive Runge-Kutta pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .diagnostics import DecayFit, Profile1D, fit_decay_exponent
from .model import ProblemParams, indicial_roots

R0_DEFAULT = 1e-3
R0_MAX = 1e-2
POINTS_PER_UNIT = 100
# classification thresholds
ZERO_BAND = 0.01
TAIL_FRACTION = 0.1
# scipy cannot honour relative tolerances below ~100 eps
MIN_RTOL = 2.5e-14


class StepFailure(RuntimeError):
    pass


class SeriesRadiusTooLarge(ValueError):
    pass


def coth(r):
    r = np.asarray(r, dtype=float)
    big = r > 20.0
    out = np.empty_like(r)
    out[~big] = 1.0 / np.tanh(r[~big])
    out[big] = 1.0 + 2.0 / np.expm1(2.0 * r[big])
    return out


@dataclass
class RadialRun:
    a: float
    r_max: float
    tol: float
    profile: Profile1D
    outcome: str = "undetermined"
    r0: float = R0_DEFAULT
    sign_changes: int = 0
    nfev: int = 0

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.profile.values).max())


def integrate_radial(params: ProblemParams, a: float, r_max: float = 25.0,
                     tol: float = 1e-10, r0: float = R0_DEFAULT,
                     points_per_unit: int = POINTS_PER_UNIT,
                     method: str = "DOP853") -> RadialRun:
    """Integrate the regular radial solution with ``u(0) = a`` out to ``r_max``.

    Initial data at ``r0`` come from ``u = a + f(a) r^2 / (2n)``,
    ``u' = f(a) r / n``.
    """
    if abs(a) > 1:
        raise ValueError(f"|a| must be <= 1, got {a}")
    if r_max < 10:
        raise ValueError("r_max must be >= 10")
    if not 1e-14 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-14, 1e-6]")
    if r0 > R0_MAX:
        raise SeriesRadiusTooLarge(f"series start r0={r0} exceeds {R0_MAX}")
    n = params.n
    f = params.potential.f
    fa = float(f(np.float64(a)))
    y0 = [a + fa * r0 * r0 / (2 * n), fa * r0 / n]

    def rhs(r, y):
        c = 1.0 / math.tanh(r) if r <= 20.0 else 1.0 + 2.0 / math.expm1(2.0 * r)
        return [y[1], f(y[0]) - (n - 1) * c * y[1]]

    npts = int(math.ceil(points_per_unit * (r_max - r0))) + 1
    grid = np.linspace(r0, r_max, npts)
    sol = solve_ivp(rhs, (r0, r_max), y0, method=method, t_eval=grid,
                    rtol=max(tol, MIN_RTOL), atol=tol)
    if not sol.success:
        raise StepFailure(sol.message)
    u, du = sol.y
    profile = Profile1D("geodesic_r", grid, u, du, params)
    s = np.sign(du[np.abs(du) > 1e-14])
    run = RadialRun(a, r_max, tol, profile, r0=r0,
                    sign_changes=int(np.count_nonzero(np.diff(s))), nfev=sol.nfev)
    run.outcome = classify_radial_limit(run)
    return run


def classify_radial_limit(run: RadialRun, band: float = ZERO_BAND,
                          tail_fraction: float = TAIL_FRACTION) -> str:
    """``constant_pm1`` for ``a = +-1``; ``tends_to_zero`` if the tail sits in the zero band."""
    if abs(run.a) == 1.0:
        return "constant_pm1"
    p = run.profile
    tail = p.grid >= p.grid[-1] - tail_fraction * (p.grid[-1] - p.grid[0])
    if np.all(np.abs(p.values[tail]) < band) and np.all(np.abs(p.derivs[tail]) < band):
        return "tends_to_zero"
    return "undetermined"


@dataclass
class SweepReport:
    runs: list[RadialRun]
    fits: list[DecayFit | None]
    errors: dict[float, str] = field(default_factory=dict)
    alpha_minus: float | None = None

    def max_rel_exponent_error(self) -> float:
        errs = [f.rel_error(self.alpha_minus) for f in self.fits if f is not None]
        return max(errs) if errs else float("nan")


def sweep_family(params: ProblemParams, a_values, r_max: float = 30.0,
                 tol: float = 1e-10, window: tuple[float, float] | None = None) -> SweepReport:
    """Run the one-parameter family and fit each tail against ``alpha_-``.

    Per-member failures are collected in ``errors`` and do not stop the sweep.
    """
    try:
        am = indicial_roots(params.n, params.potential.lam)[0]
    except ValueError:
        am = None
    runs, fits, errors = [], [], {}
    for a in a_values:
        if abs(a) >= 1:
            errors[a] = "|a| must be < 1"
            continue
        try:
            run = integrate_radial(params, a, r_max, tol)
        except (StepFailure, ValueError) as exc:
            errors[a] = str(exc)
            continue
        runs.append(run)
        fit = None
        if a != 0:
            try:
                fit = fit_decay_exponent(run.profile, window, "to_zero")
            except ValueError as exc:
                errors[a] = f"fit: {exc}"
        fits.append(fit)
    return SweepReport(runs, fits, errors, am)
