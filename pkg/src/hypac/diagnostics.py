"""Chart-generic checks for one-dimensional profiles.

A :class:`Profile1D` is ``u`` and ``u'`` sampled on a grid in one of four
charts:

``geodesic_r``
    geodesic distance from a point (radial solutions),
``log_x_xi``
    ``xi = log x`` in the upper half-space (parabolic solutions),
``halfspace_x``
    the half-space height ``x`` itself,
``signed_dist_t``
    signed distance to a totally geodesic hyperplane (hyperbolic solutions).

The integrated identities below hold exactly for true solutions, so their
residuals measure the combined integrator/discretisation/quadrature error.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline

from .model import ProblemParams, cubic_potential

CHARTS = ("geodesic_r", "log_x_xi", "halfspace_x", "signed_dist_t")
EXPONENTIAL_CHARTS = ("geodesic_r", "signed_dist_t")
TARGETS = {"to_zero": 0.0, "to_plus_one": 1.0, "to_minus_one": -1.0}
# |u - target| below this counts as "converged to target"
CONVERGED = 1e-12
DEFAULT_WINDOW_FRACTION = 0.4
XI_LIMIT = 700.0


class WindowTooSmall(ValueError):
    pass


class TargetReached(ValueError):
    pass


class ChartMismatch(ValueError):
    pass


@dataclass
class Profile1D:
    chart: str
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    params: ProblemParams | None = None

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.derivs = np.asarray(self.derivs, dtype=float)
        if not (self.grid.shape == self.values.shape == self.derivs.shape) or self.grid.ndim != 1:
            raise ValueError("grid, values and derivs must be 1-D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def __len__(self):
        return self.grid.size

    def interpolant(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.grid, self.values, self.derivs)

    def within_bounds(self, slack: float = 1e-6) -> bool:
        return bool(np.all(np.abs(self.values) <= 1.0 + slack))

    def to_halfspace(self) -> "Profile1D":
        """Push a ``log_x_xi`` profile forward to ``x = e^xi``.

        Nodes with ``|xi| > 700`` (where ``e^xi`` leaves double range) are dropped.
        """
        if self.chart != "log_x_xi":
            raise ChartMismatch("only log_x_xi profiles can be pushed to halfspace_x")
        keep = np.abs(self.grid) <= XI_LIMIT
        x = np.exp(self.grid[keep])
        return Profile1D("halfspace_x", x, self.values[keep], self.derivs[keep] / x, self.params)

    def to_csv(self, path: str | Path) -> Path:
        """Write ``coord,u,du`` plus a JSON sidecar with the chart and parameters."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["coord", "u", "du"])
            for row in zip(self.grid, self.values, self.derivs):
                w.writerow([repr(float(v)) for v in row])
        meta = {"chart": self.chart,
                "params": self.params.to_dict() if self.params is not None else None}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2))
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> "Profile1D":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        params = None
        p = meta.get("params")
        if p and p["potential"]["kind"] == "cubic":
            params = ProblemParams(p["n"], cubic_potential(p["potential"]["k"]))
        return cls(meta["chart"], data[:, 0], data[:, 1], data[:, 2], params)


@dataclass
class DecayFit:
    exponent: float
    prefactor: float
    window: tuple[float, float]
    rms_residual: float
    npoints: int = 0

    def rel_error(self, expected: float) -> float:
        return abs(self.exponent - expected) / abs(expected)


def default_window(profile: Profile1D, fraction: float = DEFAULT_WINDOW_FRACTION) -> tuple[float, float]:
    lo, hi = profile.grid[0], profile.grid[-1]
    return (hi - fraction * (hi - lo), hi)


def fit_decay_exponent(profile: Profile1D, window: tuple[float, float] | None = None,
                       mode: str = "to_zero") -> DecayFit:
    """Fit ``|u - target| ~ C e^{-a s}`` (exponential charts) or ``C x^a``.

    For ``geodesic_r`` and ``signed_dist_t`` the exponent is minus the slope
    of ``log|u - target|`` against the coordinate; for ``halfspace_x`` it is
    the slope against ``log x`` and for ``log_x_xi`` the slope against
    ``xi`` (the same number, as ``xi = log x``).
    """
    target = TARGETS[mode]
    if window is None:
        window = default_window(profile)
    lo, hi = window
    sel = (profile.grid >= lo) & (profile.grid <= hi)
    s = profile.grid[sel]
    d = profile.values[sel] - target
    ad = np.abs(d)
    # trim converged ends of the window
    keep = np.nonzero(ad >= CONVERGED)[0]
    if keep.size:
        s, d, ad = s[keep[0]:keep[-1] + 1], d[keep[0]:keep[-1] + 1], ad[keep[0]:keep[-1] + 1]
    if s.size < 10:
        raise WindowTooSmall(f"only {s.size} usable points in window {window}")
    if np.any(ad < CONVERGED) or np.any(np.sign(d) != np.sign(d[0])):
        raise TargetReached(f"u reaches {target} inside window {window}")
    x = np.log(s) if profile.chart == "halfspace_x" else s
    y = np.log(ad)
    slope, icpt = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    exponent = -slope if profile.chart in EXPONENTIAL_CHARTS else slope
    return DecayFit(float(exponent), float(np.sign(d[0]) * np.exp(icpt)),
                    (float(s[0]), float(s[-1])), rms, int(s.size))


_ENERGY_CHARTS = ("geodesic_r", "log_x_xi", "signed_dist_t")


def _energy_weight(chart: str, s: np.ndarray, n: int):
    if chart == "geodesic_r":
        return 1.0 / np.tanh(s), n - 1
    if chart == "log_x_xi":
        return np.ones_like(s), -(n - 1)
    return np.tanh(s), n - 1


def energy_identity_residual(profile: Profile1D, a: float | None = None,
                             b: float | None = None) -> float:
    """Residual of the integrated energy identity on ``[a, b]`` (default: whole grid).

    ``u'^2/2 |_a^b + c_n int_a^b w u'^2 ds - (F(u(b)) - F(u(a)))`` with
    ``(w, c_n)`` = ``(coth, n-1)``, ``(1, -(n-1))``, ``(tanh, n-1)`` in the
    ``geodesic_r``, ``log_x_xi``, ``signed_dist_t`` charts.
    """
    if profile.chart not in _ENERGY_CHARTS:
        raise ChartMismatch(f"no energy identity in chart {profile.chart!r}")
    if profile.params is None:
        raise ValueError("profile carries no problem parameters")
    s, u, du = _restrict(profile, a, b)
    w, c = _energy_weight(profile.chart, s, profile.params.n)
    F = profile.params.potential.F
    integral = simpson(w * du * du, x=s)
    res = 0.5 * (du[-1] ** 2 - du[0] ** 2) + c * integral - (float(F(u[-1])) - float(F(u[0])))
    return float(abs(res))


def flux_identity_residual(profile: Profile1D, a: float, b: float,
                           normalize: bool = False) -> float:
    """``|g u'|_a^b - int_a^b g f(u) dr|`` with ``g = sinh(r)^(n-1)``.

    With ``normalize=True`` the residual is divided by ``max(1, g(b))`` so
    that far-out intervals can be compared on the same scale.
    """
    if profile.chart != "geodesic_r":
        raise ChartMismatch("flux identity needs a geodesic_r profile")
    if not (profile.grid[0] <= a < b <= profile.grid[-1]):
        raise ValueError(f"[{a}, {b}] not inside the grid")
    n = profile.params.n
    s, u, du = _restrict(profile, a, b)
    g = np.sinh(s) ** (n - 1)
    integral = simpson(g * profile.params.potential.f(u), x=s)
    res = abs(g[-1] * du[-1] - g[0] * du[0] - integral)
    if normalize:
        res /= max(1.0, g[-1])
    return float(res)


def _restrict(profile: Profile1D, a, b):
    """Nodal data on ``[a, b]``, with ``a`` and ``b`` snapped to the nearest grid nodes.

    Snapping keeps every term of an identity exact on the snapped interval;
    interpolating end values instead would inject interpolation error that
    the weight ``g(r)`` can amplify by orders of magnitude.
    """
    grid = profile.grid
    i = 0 if a is None else int(np.argmin(np.abs(grid - a)))
    j = grid.size - 1 if b is None else int(np.argmin(np.abs(grid - b)))
    if j - i < 2:
        raise ValueError(f"interval [{a}, {b}] spans fewer than 3 grid nodes")
    sl = slice(i, j + 1)
    return grid[sl], profile.values[sl], profile.derivs[sl]
