"""Horosphere-invariant solutions via the phase plane of ``u'' - (n-1) u' = f(u)``.

In ``xi = log x`` the ODE ``x^2 u'' + (2-n) x u' = f(u)`` becomes the
autonomous system ``u' = v``, ``v' = (n-1) v + f(u)`` with fixed points
``(-1, 0)``, ``(0, 0)`` and ``(1, 0)``.  The ``(0,0) -> (1,0)`` connection is
computed by integrating the one-dimensional stable manifold of the saddle
``(1, 0)`` backwards in ``xi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, OdeSolution, simpson
from scipy.optimize import brentq

from .diagnostics import Profile1D
from .model import ProblemParams, cubic_potential

MIN_RTOL = 2.5e-14
BALL_RADIUS = 1e-3
ESCAPE_RADIUS = 10.0
EVENT_XTOL = 1e-10
# sub-samples per accepted step when scanning for sign changes
SCAN_POINTS = 9
# local error control per unit of requested global accuracy (about 100 accepted steps per connection)
LOCAL_TOL_FACTOR = 1e-2
BRANCHES = ("unstable_up", "unstable_down", "stable_backward_up", "stable_backward_down")


class EigenvectorUndefined(ValueError):
    pass


class StepFailure(RuntimeError):
    pass


class NoConnection(RuntimeError):
    pass


class BracketInvalid(ValueError):
    pass


@dataclass
class FixedPointInfo:
    location: tuple[float, float]
    eigenvalues: tuple
    eigenvectors: list[np.ndarray] | None
    kind: str

    def unit_eigenvector(self, which: str) -> np.ndarray:
        """Unit eigenvector of the ``"unstable"`` (largest) or ``"stable"`` (smallest) real eigenvalue."""
        if self.eigenvectors is None:
            raise EigenvectorUndefined(f"{self.kind} at {self.location} has no real eigenvectors")
        mus = [float(np.real(m)) for m in self.eigenvalues]
        if which == "unstable":
            i = int(np.argmax(mus))
            if mus[i] <= 0:
                raise EigenvectorUndefined("no unstable direction")
        else:
            i = int(np.argmin(mus))
            if mus[i] >= 0:
                raise EigenvectorUndefined("no stable direction")
        e = self.eigenvectors[i]
        return e / np.linalg.norm(e)


def _linearisation_roots(n, fprime_at):
    """Roots of ``mu^2 - (n-1) mu - f'(u*) = 0``."""
    m = n - 1
    disc = m * m + 4.0 * fprime_at
    if disc >= 0:
        sq = math.sqrt(disc)
        return (0.5 * (m - sq), 0.5 * (m + sq)), disc
    sq = math.sqrt(-disc)
    return (complex(0.5 * m, -0.5 * sq), complex(0.5 * m, 0.5 * sq)), disc


def classify_fixed_points(params: ProblemParams) -> list[FixedPointInfo]:
    n = params.n
    fp = params.potential.fprime
    out = []
    for u in (-1.0, 0.0, 1.0):
        d = float(fp(np.float64(u)))
        mus, disc = _linearisation_roots(n, d)
        if disc >= 0:
            vecs = [np.array([1.0, mu]) for mu in mus]
            if mus[0] < 0 < mus[1]:
                kind = "saddle"
            elif mus[0] > 0:
                kind = "unstable_node"
            else:
                kind = "degenerate"
        else:
            vecs = None
            kind = "unstable_spiral" if mus[0].real > 0 else "stable_spiral"
        out.append(FixedPointInfo((u, 0.0), mus, vecs, kind))
    return out


def fixed_point(params: ProblemParams, u: float) -> FixedPointInfo:
    for info in classify_fixed_points(params):
        if info.location[0] == u:
            return info
    raise ValueError(f"({u}, 0) is not a fixed point")


@dataclass
class PhaseOrbit:
    xi: np.ndarray
    states: np.ndarray
    origin_fp: tuple[float, float]
    outcome: str
    outcome_value: object = None
    branch: str = ""
    offset: float = 0.0
    tol: float = 0.0
    xi_event: float | None = None
    alignment: float | None = None
    sol: OdeSolution | None = field(default=None, repr=False)
    params: ProblemParams | None = field(default=None, repr=False)

    def __call__(self, xi):
        return self.sol(xi)

    def sample(self, points_per_unit: int = 50, per_step: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """Dense samples: a uniform grid merged with ``per_step`` points inside every accepted step."""
        lo, hi = self.xi[0], self.xi[-1]
        m = max(int(math.ceil((hi - lo) * points_per_unit)) + 1, 3)
        knots = self.xi
        sub = (knots[:-1, None] + np.diff(knots)[:, None] * np.linspace(0, 1, per_step + 1)[None, :-1])
        grid = np.unique(np.concatenate([np.linspace(lo, hi, m), sub.ravel(), [hi]]))
        grid = grid[np.concatenate([[True], np.diff(grid) > 1e-12 * max(1.0, abs(hi))])]
        return grid, self.sol(grid).T

    def to_profile(self, points_per_unit: int = 50) -> Profile1D:
        grid, st = self.sample(points_per_unit)
        return Profile1D("log_x_xi", grid, st[:, 0], st[:, 1], self.params)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.xi, self.states]), delimiter=",",
                   header="xi,u,v", comments="", fmt="%.17g")


def _rhs(params: ProblemParams):
    m = params.n - 1
    f = params.potential.f

    def rhs(xi, y):
        return np.array([y[1], m * y[1] + f(y[0])])

    return rhs


@dataclass
class _Event:
    name: str
    g: object
    direction: int = 0  # +1: - to +, -1: + to -, 0: either
    condition: object = None
    value: object = None


def _integrate(rhs, y0, span, tol, events, max_step=np.inf):
    """Step an explicit RK 8(5,3) pair, scanning each accepted step for events.

    Returns ``(ts, ys, interpolants, event_name, event_value, t_event)``;
    ``event_name`` is ``"max_time"`` when ``span`` is exhausted.
    """
    solver = DOP853(rhs, 0.0, np.asarray(y0, float), span, rtol=max(tol, MIN_RTOL),
                    atol=tol, max_step=max_step)
    ts, ys, interps = [0.0], [np.asarray(y0, float)], []
    while solver.status == "running":
        t_old = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise StepFailure(msg)
        t_new = solver.t
        interp = solver.dense_output()
        hit = _scan_step(interp, t_old, t_new, events)
        if hit is not None:
            ev, t_ev = hit
            ts.append(t_ev)
            ys.append(interp(t_ev))
            interps.append(interp)
            return ts, ys, interps, ev, t_ev
        ts.append(t_new)
        ys.append(solver.y.copy())
        interps.append(interp)
    return ts, ys, interps, None, None


def _scan_step(interp, t0, t1, events):
    taus = np.linspace(t0, t1, SCAN_POINTS)
    states = interp(taus).T
    best = None
    for ev in events:
        g = np.array([ev.g(s) for s in states])
        for i in range(SCAN_POINTS - 1):
            a, b = g[i], g[i + 1]
            if a == 0 and i == 0 and t0 == 0.0:
                continue
            if not (np.sign(a) != np.sign(b) or b == 0):
                continue
            if ev.direction > 0 and not a < b:
                continue
            if ev.direction < 0 and not a > b:
                continue
            if a == b:
                continue
            root = brentq(lambda t: ev.g(interp(t)), taus[i], taus[i + 1],
                          xtol=EVENT_XTOL, rtol=4 * np.finfo(float).eps)
            if ev.condition is not None and not ev.condition(interp(root)):
                continue
            # earliest along the direction of integration
            if best is None or abs(root - t0) < abs(best[1] - t0):
                best = (ev, root)
            break
    return best


def shoot_manifold(params: ProblemParams, fp: tuple[float, float], branch: str,
                   offset: float = 1e-6, xi_span: float = 400.0, tol: float = 1e-10,
                   stop_on_axis: bool = True, ball_radius: float = BALL_RADIUS,
                   escape_radius: float = ESCAPE_RADIUS) -> PhaseOrbit:
    """Integrate one branch of the (un)stable manifold of a fixed point.

    ``branch`` picks the eigen-direction (``unstable``/``stable_backward``)
    and its orientation by the sign of the ``u`` component (``up`` means
    ``u`` initially increases away from the fixed point).  Stable branches
    are integrated in reversed ``xi``.  The first event decides the outcome:

    * ``crosses_axis``: ``v = 0`` with ``-1 < u < 1``,
    * ``converges_to``: entry into the ``ball_radius`` ball of another fixed point,
    * ``passes_above``: ``u`` crosses 1 upward with ``v > 0``,
    * ``escapes``: ``|(u, v)| > escape_radius``,
    * ``max_time``: none of the above within ``xi_span``.
    """
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    if not 1e-9 <= offset <= 1e-4:
        raise ValueError("offset must lie in [1e-9, 1e-4]")
    info = fixed_point(params, fp[0])
    stable = branch.startswith("stable")
    e = info.unit_eigenvector("stable" if stable else "unstable")
    if (e[0] < 0) == branch.endswith("up"):
        e = -e
    y0 = np.array(info.location) + offset * e
    span = -xi_span if stable else xi_span
    others = [np.array(p.location) for p in classify_fixed_points(params)
              if p.location != info.location]

    events = []
    if stop_on_axis:
        events.append(_Event("crosses_axis", lambda y: y[1], 0,
                             lambda y: -1.0 < y[0] < 1.0))
    for q in others:
        # entry only: the scan samples follow the direction of travel
        events.append(_Event("converges_to", (lambda q: lambda y: np.hypot(*(y - q)) - ball_radius)(q),
                             -1, None, (float(q[0]), float(q[1]))))
    if not stable:
        events.append(_Event("passes_above", lambda y: y[0] - 1.0, +1, lambda y: y[1] > 0))
    events.append(_Event("escapes", lambda y: np.hypot(y[0], y[1]) - escape_radius, +1))
    rhs = _rhs(params)
    ts, ys, interps, ev, t_ev = _integrate(rhs, y0, span, tol, events)
    if stable:
        # OdeSolution wants increasing knots
        ts_arr = np.array(ts[::-1])
        ys_arr = np.array(ys[::-1])
        sol = OdeSolution(np.array(ts), interps)
    else:
        ts_arr = np.array(ts)
        ys_arr = np.array(ys)
        sol = OdeSolution(ts_arr, interps)
    orbit = PhaseOrbit(ts_arr, ys_arr, info.location, "max_time", None, branch, offset,
                       tol, sol=sol, params=params)
    if ev is not None:
        orbit.outcome = ev.name
        orbit.xi_event = float(t_ev)
        y = sol(t_ev)
        if ev.name == "crosses_axis":
            orbit.outcome_value = float(y[0])
        elif ev.name == "converges_to":
            orbit.outcome_value = ev.value
            orbit.alignment = _alignment(params, ev.value, y)
        elif ev.name == "passes_above":
            orbit.outcome_value = float(y[1])
        else:
            orbit.outcome_value = float(np.hypot(*y))
    return orbit


def _alignment(params, fp, y):
    """|cos| between the approach direction and the nearest real eigenvector."""
    info = fixed_point(params, fp[0])
    if info.eigenvectors is None:
        return None
    d = np.asarray(y) - np.asarray(fp)
    d /= np.linalg.norm(d)
    return max(abs(float(d @ (e / np.linalg.norm(e)))) for e in info.eigenvectors)


@dataclass
class Heteroclinic:
    xi_profile: Profile1D
    x_profile: Profile1D
    orbit: PhaseOrbit
    shift: float

    @property
    def min_u(self) -> float:
        return float(self.xi_profile.values.min())


def heteroclinic_profile(params: ProblemParams, tol: float = 1e-12, offset: float = 1e-7,
                         target: float = 1.0, end_radius: float = 1e-8,
                         points_per_unit: int = 50, xi_span: float | None = None) -> Heteroclinic:
    """The ``(0,0) -> (target,0)`` connection, normalised by ``u(0) = target/2``.

    Computed by backward shooting along the stable eigenvector of the saddle
    ``(target, 0)``; integration stops once the orbit is within
    ``end_radius`` of the origin.  ``tol`` is the target accuracy of the
    profile; the integrator runs at ``LOCAL_TOL_FACTOR * tol`` (floored at
    ``MIN_RTOL``) since local errors accumulate over the accepted steps.
    Returns the profile in ``xi`` and its pushforward to ``x = e^xi``.
    """
    if not params.potential.lam > 0:
        raise ValueError("need -f'(0) > 0")
    branch = "stable_backward_down" if target > 0 else "stable_backward_up"
    if xi_span is None:
        # slowest backward rate at the origin is Re(mu_-); allow for reaching end_radius
        slow = min(float(np.real(m)) for m in fixed_point(params, 0.0).eigenvalues)
        xi_span = max(200.0, 2.0 * math.log(1.0 / end_radius) / slow)
    local = max(LOCAL_TOL_FACTOR * tol, MIN_RTOL)
    orbit = shoot_manifold(params, (target, 0.0), branch, offset, xi_span, local,
                           stop_on_axis=False, ball_radius=end_radius, escape_radius=ESCAPE_RADIUS)
    if orbit.outcome != "converges_to" or orbit.outcome_value != (0.0, 0.0):
        raise NoConnection(f"stable manifold of ({target}, 0) ended with {orbit.outcome}")
    lo, hi = orbit.xi[0], orbit.xi[-1]
    # last crossing of u = target/2 before reaching the well
    g, st = orbit.sample(20)
    h = st[:, 0] - 0.5 * target
    idx = np.nonzero(np.sign(h[:-1]) != np.sign(h[1:]))[0]
    if idx.size == 0:
        raise NoConnection("profile never crosses the half-way value")
    i = idx[-1]
    xi0 = brentq(lambda s: orbit.sol(s)[0] - 0.5 * target, g[i], g[i + 1], xtol=1e-15, rtol=1e-15)
    lo_s, hi_s = lo - xi0, hi - xi0
    kmin = int(math.ceil(lo_s * points_per_unit))
    kmax = int(math.floor(hi_s * points_per_unit))
    grid = np.arange(kmin, kmax + 1) / points_per_unit
    st = orbit.sol(grid + xi0)
    prof = Profile1D("log_x_xi", grid, st[0], st[1], params)
    return Heteroclinic(prof, prof.to_halfspace(), orbit, float(xi0))


def explicit_solution(n: int, x):
    """``x^a / (1 + x^a)`` with ``a = (n-1)/3``."""
    s = np.asarray(x, float) ** ((n - 1) / 3.0)
    return s / (1.0 + s)


def explicit_solution_residual(n: int, sign: float = 1.0, npts: int = 2000) -> float:
    """Sup of ``|x^2 u'' + (2-n) x u' - f(u)|`` for the explicit solution.

    ``f(u) = sign * k u (u^2 - 1)`` with ``k = 2 (n-1)^2 / 9``; ``sign=-1``
    evaluates the opposite sign convention.  Derivatives are closed-form in
    ``s = x^a``: ``x u' = a s / (1+s)^2`` and
    ``x^2 u'' = a^2 s (1-s) / (1+s)^3 - a s / (1+s)^2``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    a = (n - 1) / 3.0
    k = 2.0 * (n - 1) ** 2 / 9.0
    x = np.exp(np.linspace(-20.0, 20.0, npts))
    s = x ** a
    u = s / (1.0 + s)
    xu1 = a * s / (1.0 + s) ** 2
    x2u2 = a * a * s * (1.0 - s) / (1.0 + s) ** 3 - xu1
    f = sign * k * u * (u * u - 1.0)
    return float(np.max(np.abs(x2u2 + (2 - n) * xu1 - f)))


@dataclass
class CertificateReport:
    outcome: str
    v_at_crossing: float | None
    xi_at_event: float | None
    dissipation: float
    kinetic_change: float
    potential_change: float
    identity_residual: float
    orbit: PhaseOrbit = field(repr=False)
    offset: float = 0.0
    tol: float = 0.0

    @property
    def certified(self) -> bool:
        return self.outcome == "passes_above" and (self.v_at_crossing or 0) > 0

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "v_at_crossing": self.v_at_crossing,
                "xi_at_event": self.xi_at_event, "dissipation": self.dissipation,
                "kinetic_change": self.kinetic_change, "potential_change": self.potential_change,
                "identity_residual": self.identity_residual, "offset": self.offset,
                "tol": self.tol, "certified": self.certified}


def nonexistence_certificate(params: ProblemParams, tol: float = 1e-10,
                             offset: float = 1e-6) -> CertificateReport:
    """Numerical evidence that no ``(-1,0) -> (1,0)`` connection exists.

    Shoots the upward unstable branch of ``(-1, 0)`` and records the
    energy ledger ``v^2/2 |  - (n-1) int v^2 = F(u) |`` along it up to the
    terminating event.
    """
    pot = params.potential
    if abs(float(pot.F(np.float64(1.0))) - float(pot.F(np.float64(-1.0)))) > 1e-10:
        raise ValueError("certificate needs balanced wells F(-1) = F(1)")
    orbit = shoot_manifold(params, (-1.0, 0.0), "unstable_up", offset, 400.0, tol)
    assert orbit.outcome != "crosses_axis" or not (0 < orbit.outcome_value < 1), \
        "orbit returned to v=0 inside (0,1), contradicting the energy identity"
    grid, st = orbit.sample(400)
    u, v = st[:, 0], st[:, 1]
    diss = -(params.n - 1) * simpson(v * v, x=grid)
    kin = 0.5 * (v[-1] ** 2 - v[0] ** 2)
    pot_change = float(pot.F(u[-1])) - float(pot.F(u[0]))
    return CertificateReport(orbit.outcome,
                             orbit.outcome_value if orbit.outcome == "passes_above" else None,
                             orbit.xi_event, float(diss), float(kin), pot_change,
                             float(abs(kin + diss - pot_change)), orbit, offset, tol)


@dataclass
class SignTest:
    k: float
    negative: bool
    min_u: float
    slow_coefficient: float | None
    spiral: bool


def profile_changes_sign(n: int, k: float, tol: float = 1e-12) -> SignTest:
    """Does the cubic-family connection ``(0,0) -> (1,0)`` dip below zero?

    Besides the sampled minimum, the sign of the slow-eigenmode coefficient
    at the end of the backward integration decides the sign of ``u`` as
    ``xi -> -oo`` (node case); in the spiral case ``u`` oscillates about 0.
    """
    params = ProblemParams(n, cubic_potential(k))
    het = heteroclinic_profile(params, tol=tol, end_radius=1e-9)
    min_u = het.min_u
    spiral = k > (n - 1) ** 2 / 4
    coef = None
    if not spiral:
        info = fixed_point(params, 0.0)
        am, ap = (float(np.real(m)) for m in info.eigenvalues)
        u, v = het.orbit.states[0]
        if ap > am:
            coef = (ap * u - v) / (ap - am)
    negative = min_u < 0 or spiral or (coef is not None and coef < 0)
    return SignTest(k, bool(negative), min_u, coef, spiral)


@dataclass
class ThresholdReport:
    gamma: float
    bracket: tuple[float, float]
    history: list[SignTest]
    node_spiral_transition: float


def monotonicity_threshold(n: int, k_range: tuple[float, float] = (0.01, 0.3),
                           tol_k: float = 1e-4) -> float:
    """Estimate of the largest cubic coefficient whose connection stays positive."""
    return threshold_report(n, k_range, tol_k).gamma


def threshold_report(n: int, k_range: tuple[float, float] = (0.01, 0.3),
                     tol_k: float = 1e-4) -> ThresholdReport:
    """Bisect the cubic coefficient for the onset of negative values in the connection."""
    if tol_k < 1e-6:
        raise ValueError("tol_k must be >= 1e-6")
    lo, hi = k_range
    t_lo, t_hi = profile_changes_sign(n, lo), profile_changes_sign(n, hi)
    history = [t_lo, t_hi]
    if t_lo.negative == t_hi.negative:
        raise BracketInvalid(f"both ends of {k_range} give negative={t_lo.negative}")
    if t_lo.negative:
        raise BracketInvalid("expected a positive profile at the lower end")
    while hi - lo > tol_k:
        mid = 0.5 * (lo + hi)
        t = profile_changes_sign(n, mid)
        history.append(t)
        if t.negative:
            hi = mid
        else:
            lo = mid
    return ThresholdReport(0.5 * (lo + hi), (lo, hi), history, (n - 1) ** 2 / 4)
