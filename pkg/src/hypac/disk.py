"""Semilinear Dirichlet problem on a geodesic ball of the hyperbolic plane.

``Delta u = f(u)`` is discretised in geodesic polar coordinates,
``Delta = d_rr + coth(r) d_r + sinh(r)^-2 d_thth``, with a conservative
five-point stencil on ``(0, R] x [0, 2 pi)`` and solved by damped Newton with
sparse LU factorisations.  Boundary data at ``r = R`` stand in for asymptotic
boundary values.

The angular grid may be clustered toward ``theta = 0`` and ``theta = pi``,
where data that depend only on the signed distance ``t`` to the diameter
``{theta = 0, pi}`` develop thin layers; see :class:`DiskGrid`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from .diagnostics import Profile1D
from .model import ProblemParams

DEFAULT_STRETCH = 5.5
CONTINUATION_STEPS = 4
MAX_HALVINGS = 30
RAMP_CELLS = 2
LEVEL_SAMPLES = 4000


class NewtonDivergence(RuntimeError):
    pass


class SingularJacobian(RuntimeError):
    pass


class EmptyLevelSet(ValueError):
    pass


def signed_distance_t(z) -> np.ndarray:
    """Signed distance to the diameter ``{z2 = 0}`` of the unit disk.

    ``z`` is complex, or real with last axis ``(z1, z2)``.  Uses
    ``sinh t = 2 z2 / (1 - |z|^2)``; positive in the upper half-disk.
    """
    z = np.asarray(z)
    if np.iscomplexobj(z):
        z1, z2 = z.real, z.imag
    else:
        z1, z2 = z[..., 0], z[..., 1]
    rho2 = z1 * z1 + z2 * z2
    if np.any(rho2 >= 1):
        raise ValueError("points must lie in the open unit disk")
    return np.arcsinh(2.0 * z2 / (1.0 - rho2))


def signed_distance_polar(r, theta) -> np.ndarray:
    """Same as :func:`signed_distance_t` for geodesic polar coordinates: ``sinh t = sinh r sin theta``."""
    return np.arcsinh(np.sinh(r) * np.sin(theta))


def hyperbolic_distance(z, w) -> np.ndarray:
    """``arccosh(1 + 2 |z-w|^2 / ((1-|z|^2)(1-|w|^2)))`` for complex disk points."""
    z, w = np.asarray(z, complex), np.asarray(w, complex)
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(1.0 + num / den)


def _stretch_half(x, beta):
    """Map ``[0, pi]`` onto itself, clustering nodes at both ends."""
    return 0.5 * np.pi * (1.0 + np.tanh(beta * (2.0 * x / np.pi - 1.0)) / math.tanh(beta))


@dataclass(frozen=True)
class DiskGrid:
    """Polar lattice: rings ``r_i = i R / Nr`` (``i = 1..Nr``, ring ``Nr`` is the boundary) plus the pole.

    ``theta_stretch = 0`` gives a uniform angular grid.  A positive value
    maps each half ``[0, pi]``, ``[pi, 2 pi]`` through a tanh stretch; the
    grid stays invariant under ``theta -> -theta`` and ``theta -> theta + pi``.
    """

    R: float
    Nr: int
    Ntheta: int
    theta_stretch: float = DEFAULT_STRETCH

    def __post_init__(self):
        if self.Ntheta % 2 or self.Ntheta < 8:
            raise ValueError("Ntheta must be even and >= 8")
        if self.Nr < 10 or not self.R > 0:
            raise ValueError("need Nr >= 10 and R > 0")
        if self.theta_stretch < 0:
            raise ValueError("theta_stretch must be >= 0")

    @property
    def h(self) -> float:
        return self.R / self.Nr

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(1, self.Nr + 1)

    @property
    def theta(self) -> np.ndarray:
        s = 2.0 * np.pi * np.arange(self.Ntheta) / self.Ntheta
        if self.theta_stretch == 0:
            return s
        b = self.theta_stretch
        return np.where(s <= np.pi, _stretch_half(s, b), np.pi + _stretch_half(s - np.pi, b))

    @property
    def size(self) -> int:
        return 1 + (self.Nr - 1) * self.Ntheta

    def to_dict(self) -> dict:
        return {"R": self.R, "Nr": self.Nr, "Ntheta": self.Ntheta,
                "theta_stretch": self.theta_stretch}


@dataclass
class BoundaryData:
    name: str
    func: Callable[[DiskGrid], np.ndarray] = field(repr=False)
    params: dict = field(default_factory=dict)

    def values(self, grid: DiskGrid) -> np.ndarray:
        return np.asarray(self.func(grid), dtype=float) * np.ones(grid.Ntheta)

    @property
    def constant(self) -> float | None:
        return self.params.get("c") if self.name == "constant" else None


def constant(c: float) -> BoundaryData:
    return BoundaryData("constant", lambda g: np.full(g.Ntheta, float(c)), {"c": float(c)})


def hh_step(ramp_cells: int = RAMP_CELLS) -> BoundaryData:
    """``sign(sin theta)``, ramped linearly to 0 over ``ramp_cells`` cells at ``theta = 0, pi``."""

    def func(g: DiskGrid):
        th = g.theta
        d = np.minimum(th, np.abs(np.pi - th))
        d = np.minimum(d, 2 * np.pi - th)
        w = ramp_cells * th[1]
        val = np.minimum(1.0, d / w)
        sgn = np.where(th < np.pi, 1.0, -1.0)
        val = sgn * val
        val[np.isclose(th, 0.0) | np.isclose(th, np.pi)] = 0.0
        return val

    return BoundaryData("hh_step", func, {"ramp_cells": ramp_cells})


def profile_trace(profile: Profile1D) -> BoundaryData:
    """``U(t)`` restricted to the boundary circle, for a ``signed_dist_t`` profile."""
    if profile.chart != "signed_dist_t":
        raise ValueError("profile_trace needs a signed_dist_t profile")
    U = profile.interpolant()
    lo, hi = profile.grid[0], profile.grid[-1]

    def func(g: DiskGrid):
        t = signed_distance_polar(g.R, g.theta)
        return np.where(t >= hi, 1.0, np.where(t <= lo, -1.0, U(np.clip(t, lo, hi))))

    return BoundaryData("profile_trace", func, {"T": float(hi)})


def custom(func: Callable[[np.ndarray], np.ndarray], name: str = "custom") -> BoundaryData:
    """Data given as a function of ``theta``."""
    return BoundaryData(name, lambda g: func(g.theta))


@dataclass
class _Operator:
    L: sp.csr_matrix
    b_unit: np.ndarray  # coefficient multiplying boundary data in outermost interior ring
    diag: np.ndarray


def _assemble(grid: DiskGrid) -> _Operator:
    Nr, Nt, h = grid.Nr, grid.Ntheta, grid.h
    th = grid.theta
    dth = np.diff(np.r_[th, th[0] + 2 * np.pi])
    dthm = np.roll(dth, 1)
    cell = 0.5 * (dth + dthm)
    M = Nr - 1
    ri = grid.r[:-1]
    s, sp_, sm = np.sinh(ri), np.sinh(ri + h / 2), np.sinh(ri - h / 2)
    I, J = np.meshgrid(np.arange(M), np.arange(Nt), indexing="ij")
    p = 1 + I * Nt + J
    cr_p = sp_[I] / (s[I] * h * h)
    cr_m = sm[I] / (s[I] * h * h)
    ca_p = 1.0 / (s[I] ** 2 * dth[J] * cell[J])
    ca_m = 1.0 / (s[I] ** 2 * dthm[J] * cell[J])
    diag = -(cr_p + cr_m + ca_p + ca_m)
    inner = np.where(I == 0, 0, p - Nt)
    east = 1 + I * Nt + (J + 1) % Nt
    west = 1 + I * Nt + (J - 1) % Nt
    out = I < M - 1
    w = cell / cell.sum()
    rows = [np.zeros(Nt + 1, int), p.ravel(), p.ravel(), p.ravel(), p.ravel(), p[out]]
    cols = [np.r_[0, 1 + np.arange(Nt)], p.ravel(), east.ravel(), west.ravel(), inner.ravel(), (p + Nt)[out]]
    vals = [np.r_[1.0, -w], diag.ravel(), ca_p.ravel(), ca_m.ravel(), cr_m.ravel(), cr_p[out]]
    L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(grid.size, grid.size))
    d = np.r_[1.0, diag.ravel()]
    return _Operator(L, cr_p[M - 1], d)


@dataclass
class DiskSolution:
    grid: DiskGrid
    pole: float
    values: np.ndarray  # (Nr-1, Ntheta) interior rings
    boundary: np.ndarray
    residual_norm: float
    params: ProblemParams
    newton_steps: int = 0
    boundary_name: str = ""
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def full(self) -> np.ndarray:
        """``(Nr, Ntheta)`` values on all rings including the boundary."""
        return np.vstack([self.values, self.boundary[None, :]])

    def max_interior(self) -> float:
        return float(max(abs(self.pole), np.abs(self.values).max()))

    def interpolator(self) -> RegularGridInterpolator:
        """Bilinear interpolant in ``(r, theta)`` including the pole and periodic wrap."""
        g = self.grid
        r = np.r_[0.0, g.r]
        th = np.r_[g.theta[-1] - 2 * np.pi, g.theta, g.theta[0] + 2 * np.pi]
        full = np.vstack([np.full(g.Ntheta, self.pole), self.full])
        data = np.hstack([full[:, -1:], full, full[:, :1]])
        return RegularGridInterpolator((r, th), data, method="linear")

    def __call__(self, r, theta):
        theta = np.mod(theta, 2 * np.pi)
        return self.interpolator()(np.stack(np.broadcast_arrays(r, theta), axis=-1))

    def within_hull(self, slack: float = 1e-8) -> bool:
        """Discrete maximum principle: values inside the boundary range widened to the nearest wells."""
        lo, hi = self.boundary.min(), self.boundary.max()
        lo = min(lo, -1.0) if lo < 0 else min(lo, 0.0)
        hi = max(hi, 1.0) if hi > 0 else max(hi, 0.0)
        v = np.r_[self.pole, self.values.ravel()]
        return bool(v.min() >= lo - slack and v.max() <= hi + slack)

    def to_csv(self, path) -> Path:
        path = Path(path)
        g = self.grid
        R, TH = np.meshgrid(g.r, g.theta, indexing="ij")
        data = np.column_stack([np.r_[0.0, R.ravel()], np.r_[0.0, TH.ravel()],
                                np.r_[self.pole, self.full.ravel()]])
        np.savetxt(path, data, delimiter=",", header="r,theta,u", comments="", fmt="%.17g")
        meta = {"grid": g.to_dict(), "params": self.params.to_dict(),
                "boundary": self.boundary_name, "residual_norm": self.residual_norm,
                "newton_steps": self.newton_steps}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2))
        return path


def _initial_vector(grid: DiskGrid, init) -> np.ndarray:
    if isinstance(init, DiskSolution):
        if init.grid == grid:
            return np.r_[init.pole, init.values.ravel()]
        ip = init.interpolator()
        R, TH = np.meshgrid(grid.r[:-1], grid.theta, indexing="ij")
        inner = ip(np.stack([R.ravel(), TH.ravel()], axis=-1))
        return np.r_[init.pole, inner]
    return np.asarray(init, float).copy()


def solve_disk(params: ProblemParams, boundary: BoundaryData, grid: DiskGrid,
               tol: float = 1e-10, init=None, max_iter: int = 40,
               continuation_steps: int = CONTINUATION_STEPS) -> DiskSolution:
    """Damped Newton for the polar five-point discretisation with Dirichlet data at ``r = R``.

    Convergence is declared when the row-scaled residual ``max |res_i / L_ii|``
    drops below ``tol``.  The pole row sets ``u(0)`` to the angular average
    of the first ring.  Cold starts (``init=None``) begin at the constant
    for constant data and otherwise ramp the data amplitude
    ``1/steps, 2/steps, ..., 1`` from ``u = 0``.  ``init`` may be a solution
    on another grid; it is then interpolated.
    """
    if params.n != 2:
        raise ValueError("the disk solver is two-dimensional (n = 2)")
    if tol < 1e-10:
        raise ValueError("tol must be >= 1e-10")
    bvals = boundary.values(grid)
    if np.any(np.abs(bvals) > 1 + 1e-12):
        raise ValueError("boundary values must lie in [-1, 1]")
    op = _assemble(grid)
    if init is not None:
        u = _initial_vector(grid, init)
        amps = [1.0]
    elif boundary.constant is not None:
        u = np.full(grid.size, boundary.constant)
        amps = [1.0]
    else:
        u = np.zeros(grid.size)
        amps = [(i + 1) / continuation_steps for i in range(continuation_steps)]
    total, hist = 0, []
    for a in amps:
        u, res, steps, h = _newton(params, op, grid, a * bvals, u, tol, max_iter)
        total += steps
        hist += h
    M = grid.Nr - 1
    return DiskSolution(grid, float(u[0]), u[1:].reshape(M, grid.Ntheta), bvals, res, params,
                        total, boundary.name, hist)


def _newton(params, op, grid, bvals, u, tol, max_iter):
    f, fp = params.potential.f, params.potential.fprime
    M, Nt = grid.Nr - 1, grid.Ntheta
    b = np.zeros(grid.size)
    b[1 + (M - 1) * Nt:] = op.b_unit * bvals
    scale = np.abs(op.diag)

    def residual(v):
        r = op.L @ v + b
        r[1:] -= f(v[1:])
        return r / scale

    r = residual(u)
    res = float(np.max(np.abs(r)))
    hist = [res]
    for it in range(max_iter + 1):
        if res < tol:
            return u, res, it, hist
        if it == max_iter:
            break
        Jm = (op.L - sp.diags(np.r_[0.0, fp(u[1:])])).tocsc()
        try:
            lu = splu(Jm)
        except RuntimeError as exc:
            raise SingularJacobian(str(exc)) from None
        delta = lu.solve(-r * scale)
        if not np.all(np.isfinite(delta)):
            raise SingularJacobian("non-finite Newton update")
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + lam * delta
            r_new = residual(trial)
            res_new = float(np.max(np.abs(r_new)))
            if res_new < res:
                break
            lam *= 0.5
        else:
            raise NewtonDivergence(f"no residual decrease after {MAX_HALVINGS} halvings")
        u, r, res = trial, r_new, res_new
        hist.append(res)
    raise NewtonDivergence(f"scaled residual {res:.3g} after {max_iter} iterations")


def level_curve(grid: DiskGrid, level: float, r_max: float, samples: int = LEVEL_SAMPLES):
    """Points ``(r, theta)`` of ``{t = level}`` with ``r <= r_max``, both branches."""
    if abs(level) >= r_max:
        raise EmptyLevelSet(f"level {level} does not meet r <= {r_max}")
    if level == 0:
        r = np.linspace(0.0, r_max, samples)
        return np.r_[r, r], np.r_[np.zeros(samples), np.full(samples, np.pi)]
    # the curve reaches r = |level| at theta = +-pi/2; cluster samples there
    s = np.linspace(0.0, 1.0, samples)
    r = abs(level) + (r_max - abs(level)) * s * s
    th = np.arcsin(np.clip(math.sinh(abs(level)) / np.sinh(r), -1.0, 1.0))
    if level > 0:
        return np.r_[r, r], np.r_[th, np.pi - th]
    return np.r_[r, r], np.r_[np.pi + th, 2 * np.pi - th]


def symmetry_deviation(sol: DiskSolution, t_levels=(0.0, 1.0, -1.0, 2.0, -2.0),
                       margin: float = 2.0) -> float:
    """Largest oscillation ``max - min`` of ``u`` along the curves ``{t = level}`` inside ``r <= R - margin``."""
    ip = sol.interpolator()
    worst = 0.0
    for lev in t_levels:
        r, th = level_curve(sol.grid, float(lev), sol.grid.R - margin)
        v = ip(np.column_stack([r, np.mod(th, 2 * np.pi)]))
        worst = max(worst, float(v.max() - v.min()))
    return worst


def level_values(sol: DiskSolution, level: float, margin: float = 2.0) -> np.ndarray:
    r, th = level_curve(sol.grid, level, sol.grid.R - margin)
    return sol.interpolator()(np.column_stack([r, np.mod(th, 2 * np.pi)]))


def compare_with_profile(sol: DiskSolution, profile: Profile1D, margin: float = 2.0) -> float:
    """Sup over nodes with ``r <= R - margin`` of ``|u - U(t)|``, ``U`` by cubic Hermite interpolation."""
    if profile.chart != "signed_dist_t":
        raise ValueError("profile must be in the signed_dist_t chart")
    g = sol.grid
    sel = g.r[:-1] <= g.R - margin + 1e-12
    t = signed_distance_polar(g.r[:-1][sel, None], g.theta[None, :])
    if t.min() < profile.grid[0] or t.max() > profile.grid[-1]:
        raise ValueError("profile window does not cover the sampled t-range")
    U = profile.interpolant()
    err = np.abs(sol.values[sel] - U(t))
    return float(max(err.max(), abs(sol.pole - float(U(0.0)))))


def reflect(sol: DiskSolution) -> DiskSolution:
    """Pull back by ``theta -> -theta`` (the grid is invariant under it)."""
    idx = (-np.arange(sol.grid.Ntheta)) % sol.grid.Ntheta
    return DiskSolution(sol.grid, sol.pole, sol.values[:, idx], sol.boundary[idx], sol.residual_norm,
                        sol.params, sol.newton_steps, sol.boundary_name)
