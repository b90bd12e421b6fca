"""Double-well nonlinearities, problem parameters and indicial roots.

Every solver in the package consumes a :class:`PotentialSpec` (the
nonlinearity ``f = F'`` together with the constants derived from it) and a
:class:`ProblemParams` (the dimension of hyperbolic space plus the potential).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

Evaluator = Callable[[np.ndarray], np.ndarray]

# step of the centred difference used for F''(+-1)
FD_STEP = 1e-5
# the growth condition F(s) -> oo is only probed on |s| <= GROWTH_RADIUS
GROWTH_RADIUS = 10.0


class ComplexRootsError(ValueError):
    """The indicial quadratic has no real roots."""

    def __init__(self, n, mu, disc):
        self.n = n
        self.mu = mu
        self.disc = disc
        super().__init__(
            f"alpha^2 - {n - 1}*alpha + {mu:g} = 0 has complex roots "
            f"(discriminant {disc:.6g})")


@dataclass(frozen=True)
class PotentialSpec:
    """Nonlinearity ``f = F'`` of a double-well potential.

    Attributes
    ----------
    f, F, fprime : callable
        Vectorised evaluators of ``f``, the antiderivative ``F`` (normalised
        so that ``F(+-1) = 0``) and ``f'``.
    lam : float
        ``-f'(0)``.
    lipschitz : float
        Lipschitz constant of ``f`` on ``[-1, 1]``.
    kind : str
        ``"cubic"`` or ``"custom"``.
    k : float or None
        Coefficient of the cubic family, ``None`` for custom potentials.
    """

    f: Evaluator = field(repr=False)
    F: Evaluator = field(repr=False)
    fprime: Evaluator = field(repr=False)
    lam: float
    lipschitz: float
    kind: str = "custom"
    k: float | None = None

    @property
    def is_odd(self) -> bool:
        if self.kind == "cubic":
            return True
        s = np.linspace(0.0, 1.5, 301)
        return bool(np.allclose(self.f(-s), -self.f(s), rtol=0, atol=1e-12))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "lambda": self.lam,
                "lipschitz": self.lipschitz}


@dataclass(frozen=True)
class ProblemParams:
    n: int
    potential: PotentialSpec

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension n must be an integer >= 2, got {self.n}")

    @property
    def lam(self) -> float:
        return self.potential.lam

    def to_dict(self) -> dict:
        return {"n": self.n, "potential": self.potential.to_dict()}


def cubic_potential(k: float) -> PotentialSpec:
    """The cubic family ``f(u) = k u (u^2 - 1)``, ``F(u) = k (u^2 - 1)^2 / 4``.

    With this sign ``f'(0) = -k < 0`` so ``lambda = k`` and the Lipschitz
    constant on ``[-1, 1]`` is ``max |k (3u^2 - 1)| = 2k``.
    """
    if not k > 0:
        raise ValueError(f"cubic coefficient must be positive, got {k}")
    k = float(k)
    return PotentialSpec(
        f=lambda u: k * u * (u * u - 1.0),
        F=lambda u: 0.25 * k * (u * u - 1.0) ** 2,
        fprime=lambda u: k * (3.0 * u * u - 1.0),
        lam=k,
        lipschitz=2.0 * k,
        kind="cubic",
        k=k,
    )


def custom_potential(f: Evaluator, fprime: Evaluator, F: Evaluator | None = None,
                     grid_size: int = 4001) -> PotentialSpec:
    """Wrap user-supplied evaluators; ``F`` defaults to the quadrature of ``f`` pinned at ``F(1) = 0``."""
    if F is None:
        from scipy.integrate import quad

        def F(u):
            u = np.asarray(u, dtype=float)
            out = np.array([quad(f, 1.0, float(s), limit=200)[0] for s in u.ravel()])
            return out.reshape(u.shape) if u.ndim else float(out[0])

    lam = -float(fprime(np.array(0.0)))
    spec = PotentialSpec(f=f, F=F, fprime=fprime, lam=lam, lipschitz=1.0, kind="custom")
    L = lipschitz_on_interval(spec, grid_size)
    return PotentialSpec(f=f, F=F, fprime=fprime, lam=lam, lipschitz=L, kind="custom")


def potential_from_csv(path: str | Path) -> PotentialSpec:
    """Load a tabulated potential from a CSV with header ``s,f,fprime``.

    ``f`` is interpolated by a cubic spline (``fprime`` supplies the end
    slopes, and is itself splined for ``f'``); ``F`` is the spline
    antiderivative shifted so that ``F(1) = 0``.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["s", "f", "fprime"]:
            raise ValueError(f"{path}: expected header 's,f,fprime', got {reader.fieldnames}")
        rows = [(float(r["s"]), float(r["f"]), float(r["fprime"])) for r in reader]
    s, fv, dfv = (np.array(c) for c in zip(*sorted(rows)))
    if not (s[0] <= -1.0 and s[-1] >= 1.0):
        raise ValueError("tabulated potential must cover [-1, 1]")
    fs = CubicSpline(s, fv, bc_type=((1, dfv[0]), (1, dfv[-1])))
    dfs = CubicSpline(s, dfv)
    Fs = fs.antiderivative()
    F1 = float(Fs(1.0))
    return custom_potential(f=lambda u: fs(u), fprime=lambda u: dfs(u),
                            F=lambda u: Fs(u) - F1)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_potential(spec: PotentialSpec, samples: int = 2001) -> ValidationReport:
    """Check the double-well hypotheses on a sample grid.

    Checks: ``F(+-1) = 0``, ``F > 0`` elsewhere on ``[-1, 1]``, ``F''(+-1) > 0``,
    ``F(s)`` growing for ``1 <= |s| <= 10``, ``s f(s) >= 0`` for ``|s| >= 1``,
    ``f'(0) < 0`` and ``lambda <= L``. Failures are reported, never raised.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    checks = []
    F, f, fp = spec.F, spec.f, spec.fprime

    ends = np.array([-1.0, 1.0])
    Fe = np.abs(np.asarray(F(ends), dtype=float))
    checks.append(CheckResult("F(+-1)=0", bool(Fe.max() <= 1e-12), float(Fe.max())))

    s = np.linspace(-1.0, 1.0, samples)[1:-1]
    s = s[np.abs(np.abs(s) - 1.0) > 1e-9]
    Fi = np.asarray(F(s), dtype=float)
    j = int(np.argmin(Fi))
    checks.append(CheckResult("F>0 on (-1,1)", bool(Fi[j] > 0), float(s[j]),
                              f"min F = {Fi[j]:.3g}"))

    h = FD_STEP
    F2 = (np.asarray(f(ends + h), float) - np.asarray(f(ends - h), float)) / (2 * h)
    checks.append(CheckResult("F''(+-1)>0", bool(F2.min() > 0), float(F2.min())))

    out = np.linspace(1.0, GROWTH_RADIUS, samples)
    Fo_pos = np.asarray(F(out), float)
    Fo_neg = np.asarray(F(-out), float)
    grow = (np.all(np.diff(Fo_pos) >= -1e-12) and np.all(np.diff(Fo_neg) >= -1e-12)
            and min(Fo_pos[-1], Fo_neg[-1]) > Fi.max())
    checks.append(CheckResult("F->oo (|s|<=10)", bool(grow), float(min(Fo_pos[-1], Fo_neg[-1]))))

    tail = np.concatenate([-out, out])
    sf = tail * np.asarray(f(tail), float)
    j = int(np.argmin(sf))
    checks.append(CheckResult("s f(s)>=0 for |s|>=1", bool(sf[j] >= -1e-12), float(tail[j])))

    fp0 = float(fp(np.array(0.0)))
    checks.append(CheckResult("f'(0)<0", fp0 < 0, fp0))
    checks.append(CheckResult("lambda<=L", spec.lam <= spec.lipschitz * (1 + 1e-9),
                              spec.lam - spec.lipschitz))
    return ValidationReport(checks)


def lipschitz_on_interval(spec: PotentialSpec, grid_size: int = 4001) -> float:
    """``sup |f'|`` over ``[-1, 1]``: dense sampling plus a local golden-section refinement."""
    if grid_size < 1000:
        raise ValueError("grid_size must be >= 1000")
    if spec.kind == "cubic":
        return 2.0 * spec.k
    s = np.linspace(-1.0, 1.0, grid_size)
    g = np.abs(np.asarray(spec.fprime(s), dtype=float) * np.ones_like(s))
    j = int(np.argmax(g))
    best = float(g[j])
    lo, hi = s[max(j - 1, 0)], s[min(j + 1, grid_size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: -abs(float(spec.fprime(np.array(x)))),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def indicial_roots(n: int, mu: float) -> tuple[float, float]:
    """Real roots of ``alpha^2 - (n-1) alpha + mu = 0`` in increasing order.

    Uses the cancellation-free pairing ``alpha_- = mu / alpha_+``.
    """
    if n < 2 or not mu > 0:
        raise ValueError("need n >= 2 and mu > 0")
    m = n - 1
    disc = m * m - 4.0 * mu
    if disc < 0:
        raise ComplexRootsError(n, mu, disc)
    big = 0.5 * (m + math.sqrt(disc))
    return mu / big, big


@dataclass(frozen=True)
class IndicialRoots:
    alpha_minus: float | None
    alpha_plus: float | None
    beta_minus: float | None
    beta_plus: float | None
    disc_lambda: float
    disc_L: float


@dataclass
class ChainReport:
    roots: IndicialRoots
    applicable: bool
    inequalities: dict[str, bool]

    @property
    def holds(self) -> bool:
        return self.applicable and all(self.inequalities.values())


def _maybe_roots(n, mu):
    try:
        return indicial_roots(n, mu)
    except ComplexRootsError:
        return None, None


def root_chain_check(params: ProblemParams) -> ChainReport:
    """Evaluate ``0 < a- <= b- <= (n-1)/2 <= b+ <= a+ < n-1`` for ``lambda`` and ``L``."""
    n = params.n
    lam, L = params.potential.lam, params.potential.lipschitz
    am, ap = _maybe_roots(n, lam)
    bm, bp = _maybe_roots(n, L)
    roots = IndicialRoots(am, ap, bm, bp, (n - 1) ** 2 - 4 * lam, (n - 1) ** 2 - 4 * L)
    applicable = L <= (n - 1) ** 2 / 4
    ineq = {}
    if applicable:
        half = (n - 1) / 2
        eps = 1e-12
        ineq = {
            "0<alpha_-": am > 0,
            "alpha_-<=beta_-": am <= bm + eps,
            "beta_-<=(n-1)/2": bm <= half + eps,
            "(n-1)/2<=beta_+": half <= bp + eps,
            "beta_+<=alpha_+": bp <= ap + eps,
            "alpha_+<n-1": ap < n - 1,
        }
    return ChainReport(roots, applicable, ineq)
