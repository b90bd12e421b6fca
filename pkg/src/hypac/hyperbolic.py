"""Solutions depending only on the signed distance ``t`` to a totally geodesic hyperplane.

The profile solves ``U'' + (n-1) tanh(t) U' = f(U)`` with ``U(+-T) = +-1``
on a truncated line.  Two solvers share one discretisation:

* :func:`minimize_profile` minimises the weighted energy
  ``E(u) = int (u'^2/2 + F(u)) cosh(t)^(n-1) dt`` over piecewise-linear ``u``
  with exact cell weights and trapezoid quadrature of ``F``;
* :func:`newton_profile` applies damped Newton to the conservative
  finite-difference form ``(w U')' = w f(U)``, whose stencil is exactly the
  discrete Euler-Lagrange system of that energy.

The weight is handled in log space and rescaled by its maximum, so nothing
overflows while ``(n-1) T <= 700``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, solve_banded

from .diagnostics import DecayFit, Profile1D, fit_decay_exponent
from .model import PotentialSpec, ProblemParams

POINTS_PER_UNIT = 200
BALANCE_TOL = 1e-8
MAX_HALVINGS = 30
ARMIJO_C = 1e-4
STEP_FLOOR = 1e-13
_GAUSS = np.polynomial.legendre.leggauss(4)


class MaxIterations(RuntimeError):
    pass


class NonDecreasingEnergy(RuntimeError):
    pass


class SingularJacobian(RuntimeError):
    def __init__(self, t_location, msg=""):
        self.t_location = t_location
        super().__init__(f"near-singular Jacobian at t = {t_location:.6g}{msg}")


class Divergence(RuntimeError):
    pass


def log_cosh(t):
    t = np.abs(np.asarray(t, dtype=float))
    return t + np.log1p(np.exp(-2.0 * t)) - math.log(2.0)


def balanced_wells_check(spec: PotentialSpec) -> float:
    """``int_{-1}^{1} f(s) ds``, zero exactly when the two wells have equal depth."""
    # full_output: a zero integral makes quad flag roundoff, which is expected here
    val = quad(lambda s: float(spec.f(np.float64(s))), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13,
               full_output=1)[0]
    return float(val)


@dataclass
class _Mesh:
    t: np.ndarray
    h: float
    w: np.ndarray  # cell weights / h, rescaled
    m: np.ndarray  # lumped nodal weights, rescaled
    log_scale: float


def _mesh(n: int, T: float, N: int) -> _Mesh:
    if (n - 1) * T > 700:
        raise ValueError("(n-1) T must be <= 700")
    t = np.linspace(-T, T, N + 1)
    h = 2.0 * T / N
    log_scale = (n - 1) * float(log_cosh(T))
    xg, wg = _GAUSS
    mid = 0.5 * (t[:-1] + t[1:])
    pts = mid[:, None] + 0.5 * h * xg[None, :]
    w = 0.5 * (np.exp((n - 1) * log_cosh(pts) - log_scale) @ wg)
    m = np.empty(N + 1)
    m[1:-1] = 0.5 * (w[:-1] + w[1:])
    m[0], m[-1] = 0.5 * w[0], 0.5 * w[-1]
    return _Mesh(t, h, w, m, log_scale)


def _energy(mesh: _Mesh, u: np.ndarray, F) -> float:
    du = np.diff(u) / mesh.h
    Fu = np.asarray(F(u), dtype=float)
    return float(mesh.h * np.sum(mesh.w * (0.5 * du * du + 0.5 * (Fu[:-1] + Fu[1:]))))


def _gradient(mesh: _Mesh, u: np.ndarray, f) -> np.ndarray:
    """Derivative of the rescaled discrete energy with respect to interior nodes."""
    flux = mesh.w * np.diff(u) / mesh.h
    return -(flux[1:] - flux[:-1]) + mesh.h * mesh.m[1:-1] * f(u[1:-1])


def _el_residual(mesh: _Mesh, u: np.ndarray, f) -> np.ndarray:
    """Conservative FD residual ``(w U')'/w - f(U)`` at interior nodes."""
    return -_gradient(mesh, u, f) / (mesh.h * mesh.m[1:-1])


def _stiffness_bands(mesh: _Mesh, diag_extra: np.ndarray) -> np.ndarray:
    """Banded form of ``K + diag(diag_extra)`` for the interior unknowns."""
    w = mesh.w / mesh.h
    ab = np.zeros((3, mesh.t.size - 2))
    ab[1] = w[:-1] + w[1:] + diag_extra
    ab[0, 1:] = -w[1:-1]
    ab[2, :-1] = -w[1:-1]
    return ab


def _banded_matvec(ab, x):
    y = ab[1] * x
    y[:-1] += ab[0, 1:] * x[1:]
    y[1:] += ab[2, :-1] * x[:-1]
    return y


@dataclass
class BvpRun:
    T: float
    N: int
    profile: Profile1D
    energy: float
    method: str
    iterations: int = 0
    optimality: float = float("nan")
    energy_history: list[float] = field(default_factory=list, repr=False)
    residual_history: list[float] = field(default_factory=list, repr=False)

    @property
    def t(self) -> np.ndarray:
        return self.profile.grid

    @property
    def u(self) -> np.ndarray:
        return self.profile.values

    def value_at(self, s: float) -> float:
        return float(np.interp(s, self.t, self.u))

    def to_dict(self) -> dict:
        return {"T": self.T, "N": self.N, "energy": self.energy, "method": self.method,
                "iterations": self.iterations, "optimality": self.optimality}


def _derivative(t, u):
    """Nodal slopes of the not-a-knot cubic spline through the solution."""
    return CubicSpline(t, u)(t, 1)


def _initial(t: np.ndarray, T: float, init) -> np.ndarray:
    if isinstance(init, Profile1D):
        u = np.interp(t, init.grid, init.values)
    elif isinstance(init, np.ndarray):
        u = np.asarray(init, float).copy()
    elif init == "tanh":
        u = np.tanh(t)
    elif init == "ramp":
        u = t / T
    elif init == "zero":
        u = np.zeros_like(t)
    else:
        raise ValueError(f"unknown initial guess {init!r}")
    u[0], u[-1] = -1.0, 1.0
    return u


def _warn_unbalanced(params):
    b = balanced_wells_check(params.potential)
    if abs(b) > BALANCE_TOL:
        warnings.warn(f"unbalanced wells: int f = {b:.3g}", RuntimeWarning, stacklevel=3)


def _make_run(params, mesh, u, method, T, N, its, opt, hist=None, rhist=None):
    E = _energy(mesh, u, params.potential.F) * math.exp(mesh.log_scale)
    prof = Profile1D("signed_dist_t", mesh.t, u, _derivative(mesh.t, u), params)
    return BvpRun(T, N, prof, E, method, its, opt, hist or [], rhist or [])


def minimize_profile(params: ProblemParams, T: float = 20.0, N: int | None = None,
                     tol: float = 1e-10, init="tanh", max_iter: int = 20000) -> BvpRun:
    """Minimise the discrete weighted energy over profiles with ``u(+-T) = +-1``.

    Projected gradient descent preconditioned by ``K + L M`` (weighted
    stiffness plus Lipschitz-scaled lumped mass), with Barzilai-Borwein steps
    in the preconditioner inner product and Armijo backtracking, so the
    energy never increases.  Iterates are clipped to ``[-1, 1]``.
    Stops when the sup of the projected, mass-scaled gradient is below ``tol``.
    """
    if T < 5:
        raise ValueError("T must be >= 5")
    N = int(N if N is not None else POINTS_PER_UNIT * T)
    if N < 200:
        raise ValueError("N must be >= 200")
    _warn_unbalanced(params)
    f, F = params.potential.f, params.potential.F
    mesh = _mesh(params.n, T, N)
    scale = mesh.h * mesh.m[1:-1]
    A = _stiffness_bands(mesh, params.potential.lipschitz * scale)
    u = _initial(mesh.t, T, init)
    u[1:-1] = np.clip(u[1:-1], -1.0, 1.0)
    E = _energy(mesh, u, F)
    g = _gradient(mesh, u, f)
    history = [E]
    step = 1.0
    x_prev = g_prev = None
    for it in range(1, max_iter + 1):
        x = u[1:-1]
        pg = _projected(x, g)
        opt = float(np.max(np.abs(pg / scale)))
        if opt < tol:
            return _make_run(params, mesh, u, "minimize", T, N, it - 1, opt, history)
        d = -solve_banded((1, 1), A, g)
        if x_prev is not None:
            s, y = x - x_prev, g - g_prev
            sy = float(s @ y)
            if sy > 0:
                step = float(s @ _banded_matvec(A, s)) / sy
            else:
                step = 1.0
        step = min(max(step, 1e-8), 1e8)
        for _ in range(60):
            trial = u.copy()
            trial[1:-1] = np.clip(x + step * d, -1.0, 1.0)
            E_new = _energy(mesh, trial, F)
            if E_new <= E + ARMIJO_C * float(g @ (trial[1:-1] - x)):
                break
            step *= 0.5
        else:
            if E_new <= E:
                pass
            else:
                raise NonDecreasingEnergy(f"line search failed at iteration {it}")
        x_prev, g_prev = x.copy(), g
        u, E = trial, E_new
        g = _gradient(mesh, u, f)
        history.append(E)
    raise MaxIterations(f"no convergence in {max_iter} iterations (optimality {opt:.3g})")


def _projected(x, g):
    pg = g.copy()
    pg[(x <= -1.0) & (g > 0)] = 0.0
    pg[(x >= 1.0) & (g < 0)] = 0.0
    return pg


def newton_profile(params: ProblemParams, T: float = 20.0, N: int | None = None,
                   tol: float = 1e-10, init="tanh", max_iter: int = 50) -> BvpRun:
    """Damped Newton on the conservative second-order FD form of the profile ODE.

    The residual at node ``i`` is
    ``(w_{i+1/2}(U_{i+1}-U_i) - w_{i-1/2}(U_i-U_{i-1})) / (h^2 m_i) - f(U_i)``
    with exact cell averages ``w`` of ``cosh^(n-1)`` and ``m_i`` their mean.
    Steps are halved (up to 30 times) until the sup residual decreases.
    Iteration also stops once a full Newton update falls below
    ``STEP_FLOOR`` in sup norm: the residual then sits at its roundoff floor
    (about ``eps / h^2``), which can exceed a very small ``tol``.
    """
    if T < 5:
        raise ValueError("T must be >= 5")
    N = int(N if N is not None else POINTS_PER_UNIT * T)
    _warn_unbalanced(params)
    f, fp = params.potential.f, params.potential.fprime
    mesh = _mesh(params.n, T, N)
    scale = mesh.h * mesh.m[1:-1]
    u = _initial(mesh.t, T, init)
    r = _el_residual(mesh, u, f)
    res = float(np.max(np.abs(r)))
    history = [res]
    for it in range(1, max_iter + 1):
        if res < tol:
            return _make_run(params, mesh, u, "newton", T, N, it - 1, res, rhist=history)
        # gradient Jacobian: K + diag(h m f'(u)); residual = -gradient / scale
        ab = _stiffness_bands(mesh, scale * fp(u[1:-1]))
        g = -r * scale
        try:
            delta = solve_banded((1, 1), ab, -g)
        except LinAlgError:
            i = int(np.argmin(np.abs(ab[1])))
            raise SingularJacobian(float(mesh.t[i + 1])) from None
        if not np.all(np.isfinite(delta)):
            i = int(np.argmax(np.abs(np.nan_to_num(delta, nan=np.inf))))
            raise SingularJacobian(float(mesh.t[i + 1]))
        if float(np.max(np.abs(delta))) < STEP_FLOOR:
            u[1:-1] += delta
            res = float(np.max(np.abs(_el_residual(mesh, u, f))))
            history.append(res)
            return _make_run(params, mesh, u, "newton", T, N, it, res, rhist=history)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u.copy()
            trial[1:-1] += lam * delta
            r_new = _el_residual(mesh, trial, f)
            res_new = float(np.max(np.abs(r_new)))
            if res_new < res:
                break
            lam *= 0.5
        else:
            raise Divergence(f"no residual decrease after {MAX_HALVINGS} halvings (iteration {it})")
        u, r, res = trial, r_new, res_new
        history.append(res)
    if res < tol:
        return _make_run(params, mesh, u, "newton", T, N, max_iter, res, rhist=history)
    raise Divergence(f"residual {res:.3g} after {max_iter} iterations")


def ode_residual(run: BvpRun) -> float:
    """Interior sup of ``U'' + (n-1) tanh(t) U' - f(U)`` by standard centred differences."""
    t, u = run.t, run.u
    h = t[1] - t[0]
    n = run.profile.params.n
    d2 = (u[2:] - 2 * u[1:-1] + u[:-2]) / (h * h)
    d1 = (u[2:] - u[:-2]) / (2 * h)
    r = d2 + (n - 1) * np.tanh(t[1:-1]) * d1 - run.profile.params.potential.f(u[1:-1])
    return float(np.max(np.abs(r)))


def check_monotone(run: BvpRun, slack: float = 1e-10) -> tuple[bool, float | None]:
    """``(True, None)`` if nondecreasing up to ``slack``, else ``(False, t of first violation)``."""
    d = np.diff(run.u)
    bad = np.nonzero(d < -slack)[0]
    if bad.size:
        return False, float(run.t[bad[0]])
    return True, None


def interior_extrema_violations(run: BvpRun) -> list[float]:
    """Locations of positive local minima or negative local maxima."""
    u = run.u
    mid = u[1:-1]
    lmin = (mid < u[:-2]) & (mid < u[2:]) & (mid > 0)
    lmax = (mid > u[:-2]) & (mid > u[2:]) & (mid < 0)
    return [float(x) for x in run.t[1:-1][lmin | lmax]]


def zero_location(run: BvpRun) -> float:
    t, u = run.t, run.u
    i = int(np.nonzero(np.diff(np.sign(u)) != 0)[0][0])
    if u[i] == 0:
        return float(t[i])
    if u[i + 1] == 0:
        return float(t[i + 1])
    return float(t[i] - u[i] * (t[i + 1] - t[i]) / (u[i + 1] - u[i]))


@dataclass
class StabilityReport:
    T_list: list[float]
    center_values: list[float]
    zero_locations: list[float]
    compact_diffs: list[float]
    runs: list[BvpRun] = field(repr=False, default_factory=list)

    @property
    def zero_steps(self) -> list[float]:
        a = self.zero_locations
        return [abs(a[i + 1] - a[i]) for i in range(len(a) - 1)]

    @property
    def diffs_decreasing(self) -> bool:
        d = self.compact_diffs
        return all(d[i + 1] <= d[i] for i in range(len(d) - 1))

    def to_dict(self) -> dict:
        return {"T": self.T_list, "U_T(0)": self.center_values, "a_T": self.zero_locations,
                "sup_compact_diff": self.compact_diffs, "diffs_decreasing": self.diffs_decreasing}


def continuation_in_T(params: ProblemParams, T_list, N_per_unit: int = POINTS_PER_UNIT,
                      tol: float = 1e-10, compact: float = 5.0) -> StabilityReport:
    """Solve for increasing ``T`` and report ``U_T(0)``, the zero ``a_T`` and Cauchy differences on ``[-compact, compact]``."""
    T_list = list(T_list)
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be increasing")
    runs, centers, zeros, diffs = [], [], [], []
    prev = None
    for T in T_list:
        init = prev.profile if prev is not None else "tanh"
        run = newton_profile(params, T, int(round(N_per_unit * T)), tol, init=init)
        runs.append(run)
        centers.append(run.value_at(0.0))
        zeros.append(zero_location(run))
        if prev is not None:
            s = np.linspace(-compact, compact, int(2 * compact * N_per_unit) + 1)
            diffs.append(float(np.max(np.abs(np.interp(s, run.t, run.u) - np.interp(s, prev.t, prev.u)))))
        prev = run
    return StabilityReport(T_list, centers, zeros, diffs, runs)


def linearized_tail_rate(params: ProblemParams, end: float = 1.0) -> float:
    """Decaying root of ``mu^2 + (n-1) mu - f'(end) = 0``, the rate of ``|U - end|`` at the ``end`` side."""
    m = params.n - 1
    d = float(params.potential.fprime(np.float64(end)))
    return 0.5 * (-m - math.sqrt(m * m + 4.0 * d))


def tail_rates(run: BvpRun, window: tuple[float, float] | None = None) -> tuple[DecayFit, DecayFit]:
    """Fit ``1 - U ~ C e^{mu t}`` for ``t -> +oo`` and ``U + 1 ~ C e^{-mu t}`` for ``t -> -oo``.

    Returned exponents are signed rates ``mu`` (negative at ``+oo``, positive
    at ``-oo``).  The default window is ``[T/4, T/2]`` and its mirror, away
    from the Dirichlet ends.
    """
    if run.T < 15:
        raise ValueError("tail fits need T >= 15")
    lo, hi = window if window is not None else (run.T / 4, run.T / 2)
    p = run.profile
    plus = fit_decay_exponent(p, (lo, hi), "to_plus_one")
    mirrored = Profile1D("signed_dist_t", -p.grid[::-1], -p.values[::-1], p.derivs[::-1], p.params)
    minus = fit_decay_exponent(mirrored, (lo, hi), "to_plus_one")
    plus = DecayFit(-plus.exponent, plus.prefactor, plus.window, plus.rms_residual, plus.npoints)
    minus = DecayFit(minus.exponent, minus.prefactor, (-minus.window[1], -minus.window[0]),
                     minus.rms_residual, minus.npoints)
    return plus, minus


@dataclass
class RichardsonReport:
    Ns: tuple[int, int, int]
    diffs: tuple[float, float]

    @property
    def ratio(self) -> float:
        return self.diffs[0] / self.diffs[1]


def richardson(params: ProblemParams, T: float = 20.0, N: int | None = None,
               tol: float = 1e-12) -> RichardsonReport:
    """Sup differences on the coarse nodes between ``N``, ``2N`` and ``4N`` Newton solves."""
    N = int(N if N is not None else POINTS_PER_UNIT * T)
    runs = []
    prev = "tanh"
    for m in (1, 2, 4):
        r = newton_profile(params, T, m * N, tol, init=prev)
        runs.append(r)
        prev = r.profile
    d1 = float(np.max(np.abs(runs[1].u[::2] - runs[0].u)))
    d2 = float(np.max(np.abs(runs[2].u[::4] - runs[1].u[::2])))
    return RichardsonReport((N, 2 * N, 4 * N), (d1, d2))
