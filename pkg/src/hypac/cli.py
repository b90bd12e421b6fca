"""Command-line front end.

``hypac <command> [--config FILE] [--n INT] [--k FLOAT] [--out DIR] [flags...]``

Every run writes ``manifest.json`` (the fully resolved configuration),
``report.json``, ``summary.txt`` and gnuplot ``.dat``/``.gp`` pairs into the
output directory.  Exit status: 0 when every claim passes, 2 on a
configuration error, 3 on a solver error, 4 when a claim fails.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import disk as D
from . import hyperbolic as H
from . import parabolic as PB
from . import perturb as PT
from . import radial as RD
from . import verify as V
from .diagnostics import Profile1D, energy_identity_residual
from .model import ComplexRootsError, ProblemParams, cubic_potential, indicial_roots, root_chain_check
from .verify import Claim

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ASSERT = 0, 2, 3, 4
IDENTITY_TOL = 1e-5

# command -> {key: (type, default)}; ``None`` types accept any JSON value
COMMON = {"n": (int, 2), "k": (float, 2 / 9), "out": (str, None)}
SCHEMA = {
    "roots": {},
    "radial": {"a": (list, [0.1, 0.3, 0.5, 0.7]), "r_max": (float, 30.0), "tol": (float, 1e-10)},
    "parabolic": {"check_explicit": (bool, False), "certificate": (bool, False),
                  "threshold": (bool, False), "tol": (float, 1e-12)},
    "hyperbolic": {"T": (float, 20.0), "N": (int, None), "method": (str, "both"),
                   "tol": (float, 1e-10), "continuation": (list, None)},
    "disk": {"R": (float, 12.0), "Nr": (int, 150), "Ntheta": (int, 128),
             "boundary": (dict, {"name": "hh_step"}), "margin": (float, 2.0), "tol": (float, 1e-10)},
    "perturb": {"base": (str, "zero"), "phi0": (list, [[1, 1.0]]), "amplitude": (float, 0.02),
                "tol": (float, 1e-10)},
    "verify-all": {"quick": (bool, False), "criteria": (list, None)},
}


class ConfigError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class ExperimentResult:
    command: str
    claims: list[Claim]
    data: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)


# ------------------------------------------------------------------ config --

def _coerce(key, typ, value):
    if value is None or typ is None:
        return value
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, typ):
        return value
    raise ConfigError(f"key {key!r} expects {typ.__name__}, got {value!r}")


def resolve_config(command: str, file_cfg: dict | None, overrides: dict) -> dict:
    """Merge defaults, the JSON config and CLI flags (in increasing precedence) under a strict schema."""
    if command not in SCHEMA:
        raise ConfigError(f"unknown command {command!r}")
    schema = {**COMMON, **SCHEMA[command]}
    cfg = {k: d for k, (_, d) in schema.items()}
    file_cfg = dict(file_cfg or {})
    if file_cfg.pop("command", command) != command:
        raise ConfigError("config file is for a different command")
    for source in (file_cfg, {k: v for k, v in overrides.items() if v is not None}):
        unknown = set(source) - set(schema)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        for k, v in source.items():
            cfg[k] = _coerce(k, schema[k][0], v)
    if cfg["n"] < 2:
        raise ConfigError("n must be >= 2")
    if not cfg["k"] > 0:
        raise ConfigError("k must be positive")
    if cfg["out"] is None:
        cfg["out"] = str(Path("hypac_out") / command)
    return {"command": command, **cfg}


def _params(cfg) -> ProblemParams:
    return ProblemParams(cfg["n"], cubic_potential(cfg["k"]))


# ----------------------------------------------------------------- outputs --

def write_dat(path: Path, columns: dict[str, np.ndarray], blocks: int | None = None) -> Path:
    """Whitespace table with a ``#`` header; ``blocks`` splits rows into gnuplot scan lines."""
    arr = np.column_stack([np.asarray(v, dtype=float).ravel() for v in columns.values()])
    with open(path, "w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for i, row in enumerate(arr):
            if blocks and i and i % blocks == 0:
                fh.write("\n")
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
    return path


def write_gp(path: Path, dat: Path, xlabel: str, ylabel: str, using: str = "1:2",
             surface: bool = False) -> Path:
    lines = ["set terminal pngcairo size 900,600", f"set output '{dat.stem}.png'",
             f"set xlabel '{xlabel}'", f"set ylabel '{ylabel}'"]
    if surface:
        lines += ["set view map", "set pm3d at b", f"splot '{dat.name}' using {using} with pm3d notitle"]
    else:
        lines += ["set grid", f"plot '{dat.name}' using {using} with lines notitle"]
    path.write_text("\n".join(lines) + "\n")
    return path


def _plot_profile(out: Path, name: str, p: Profile1D) -> list[str]:
    dat = write_dat(out / f"{name}.dat", {p.chart: p.grid, "u": p.values, "du": p.derivs})
    gp = write_gp(out / f"{name}.gp", dat, p.chart, "u")
    return [dat.name, gp.name]


def _save_profile(out: Path, name: str, p: Profile1D) -> list[str]:
    p.to_csv(out / f"{name}.csv")
    return [f"{name}.csv", f"{name}.json"] + _plot_profile(out, name, p)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def emit_report(results: list[ExperimentResult], out_dir) -> tuple[Path, Path]:
    """Aggregate results into ``report.json`` and a plain-text summary table."""
    if not results:
        raise ValueError("emit_report needs at least one completed experiment")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [c for r in results for c in r.claims]
    report = {"passed": all(r.passed for r in results),
              "experiments": [{"command": r.command, "passed": r.passed, "data": r.data,
                               "artifacts": r.artifacts, "claims": [c.to_dict() for c in r.claims]}
                              for r in results]}
    rpath = out / "report.json"
    rpath.write_text(json.dumps(report, indent=2, default=_json_default))
    table = format_table(rows)
    spath = out / "summary.txt"
    spath.write_text(table + "\n")
    return rpath, spath


def format_table(claims: list[Claim]) -> str:
    head = ("crit", "claim", "measured", "tolerance", "result")
    body = []
    for c in claims:
        m = c.measured
        ms = f"{m:.6g}" if isinstance(m, (float, np.floating)) else str(m)
        body.append((str(c.criterion), c.claim, ms, c.tolerance, "PASS" if c.passed else "FAIL"))
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([fmt.format(*head), sep] + [fmt.format(*r) for r in body])


# ---------------------------------------------------------------- commands --

def cmd_roots(cfg, out: Path) -> ExperimentResult:
    params = _params(cfg)
    rep = root_chain_check(params)
    n, lam = cfg["n"], params.lam
    claims = []
    r = rep.roots
    lines = [f"{'root':<10}{'value':>22}"]
    for name, val in (("alpha_-", r.alpha_minus), ("alpha_+", r.alpha_plus),
                      ("beta_-", r.beta_minus), ("beta_+", r.beta_plus)):
        lines.append(f"{name:<10}{'complex' if val is None else f'{val:.15g}':>22}")
    print("\n".join(lines))
    if r.alpha_minus is not None:
        vieta = max(abs(r.alpha_minus + r.alpha_plus - (n - 1)), abs(r.alpha_minus * r.alpha_plus - lam))
        claims.append(Claim(0, "Vieta residual of the indicial roots", vieta, "< 1e-12", vieta < 1e-12))
    if rep.applicable:
        claims.append(Claim(0, "root chain 0 < a- <= b- <= (n-1)/2 <= b+ <= a+ < n-1",
                            str(rep.holds), "True", rep.holds))
    if not claims:
        claims.append(Claim(0, "real indicial roots", "complex", "real", False))
    data = {"alpha_minus": r.alpha_minus, "alpha_plus": r.alpha_plus, "beta_minus": r.beta_minus,
            "beta_plus": r.beta_plus, "chain_applicable": rep.applicable, "inequalities": rep.inequalities}
    return ExperimentResult("roots", claims, data)


def cmd_radial(cfg, out: Path) -> ExperimentResult:
    params = _params(cfg)
    rep = RD.sweep_family(params, cfg["a"], cfg["r_max"], cfg["tol"])
    claims, arts, data = [], [], {"alpha_minus": rep.alpha_minus, "errors": rep.errors, "runs": []}
    for run, fit in zip(rep.runs, rep.fits):
        name = f"radial_a{run.a:+.4f}"
        arts += _save_profile(out, name, run.profile)
        e = energy_identity_residual(run.profile)
        claims.append(Claim(0, f"a={run.a:g} energy identity", e, f"< {IDENTITY_TOL:g}", e < IDENTITY_TOL))
        data["runs"].append({"a": run.a, "outcome": run.outcome, "sign_changes": run.sign_changes,
                             "exponent": None if fit is None else fit.exponent})
    if rep.errors and not rep.runs:
        raise SolverError(f"every radial run failed: {rep.errors}")
    return ExperimentResult("radial", claims, data, arts)


def cmd_parabolic(cfg, out: Path) -> ExperimentResult:
    params = _params(cfg)
    n, k = cfg["n"], cfg["k"]
    claims, arts, data = [], [], {}
    if cfg["check_explicit"]:
        r = PB.explicit_solution_residual(n)
        print(f"explicit-solution residual (n={n}): {r:.3e}")
        claims.append(Claim(1, f"explicit solution residual n={n}", r, "< 1e-10", r < 1e-10))
        data["explicit_residual"] = r
    if cfg["certificate"]:
        c = PB.nonexistence_certificate(params)
        c.orbit.to_csv(out / "certificate_orbit.csv")
        xi, st = c.orbit.sample()
        dat = write_dat(out / "certificate_orbit.dat", {"u": st[:, 0], "v": st[:, 1], "xi": xi})
        arts += ["certificate_orbit.csv", dat.name, write_gp(out / "certificate_orbit.gp", dat, "u", "v").name]
        data["certificate"] = c.to_dict()
        claims.append(Claim(5, "unstable branch of (-1,0) passes above u=1", c.outcome,
                            "passes_above", c.certified))
    if cfg["threshold"]:
        t = PB.threshold_report(n)
        data["threshold"] = {"gamma": t.gamma, "bracket": list(t.bracket),
                             "node_spiral_transition": t.node_spiral_transition}
        print(f"monotonicity threshold gamma({n}) ~ {t.gamma:.6g} in {t.bracket}")
    het = None
    try:
        het = PB.heteroclinic_profile(params, tol=cfg["tol"])
    except PB.NoConnection as exc:
        data["heteroclinic"] = f"no connection: {exc}"
    if het is not None:
        arts += _save_profile(out, "heteroclinic_xi", het.xi_profile)
        e = energy_identity_residual(het.xi_profile)
        claims.append(Claim(10, "heteroclinic energy identity", e, f"< {IDENTITY_TOL:g}", e < IDENTITY_TOL))
        data["heteroclinic_min_u"] = het.min_u
        if n == 2 and abs(k - 2 / 9) < 1e-6:
            x = het.x_profile.grid
            err = float(np.max(np.abs(het.x_profile.values - PB.explicit_solution(2, x))))
            claims.append(Claim(2, "heteroclinic vs explicit solution", err, "< 1e-6", err < 1e-6))
    return ExperimentResult("parabolic", claims, data, arts)


def cmd_hyperbolic(cfg, out: Path) -> ExperimentResult:
    params = _params(cfg)
    T, N, tol, method = cfg["T"], cfg["N"], cfg["tol"], cfg["method"]
    if method not in ("minimize", "newton", "both"):
        raise ConfigError("method must be minimize, newton or both")
    runs = {}
    if method in ("minimize", "both"):
        runs["minimize"] = H.minimize_profile(params, T, N, tol)
    if method in ("newton", "both"):
        runs["newton"] = H.newton_profile(params, T, N, tol)
    claims, arts, data = [], [], {}
    for name, run in runs.items():
        arts += _save_profile(out, f"hyperbolic_{name}", run.profile)
        mono, where = H.check_monotone(run)
        claims.append(Claim(0, f"{name}: monotone", str(mono), "True", mono))
        lo, hi = run.t[0], run.t[-1]
        e = energy_identity_residual(run.profile, 0.5 * (lo + hi), lo + 0.8 * (hi - lo))
        claims.append(Claim(10, f"{name}: energy identity on [0, 0.6 T]", e, f"< {IDENTITY_TOL:g}",
                            e < IDENTITY_TOL))
        data[name] = {**run.to_dict(), "U0": run.value_at(0.0), "ode_residual": H.ode_residual(run)}
    if len(runs) == 2:
        d = float(np.max(np.abs(runs["minimize"].u - runs["newton"].u)))
        claims.append(Claim(6, "minimizer vs Newton sup difference", d, "< 1e-6", d < 1e-6))
        # independent starts: a gap means a second critical point was found, not a solver fault
        data["distinct_critical_points"] = 1 if d < 1e-6 else 2
    if cfg["continuation"]:
        st = H.continuation_in_T(params, cfg["continuation"], tol=tol)
        data["continuation"] = st.to_dict()
    return ExperimentResult("hyperbolic", claims, data, arts)


def _boundary(spec: dict) -> D.BoundaryData:
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "constant":
        return D.constant(float(spec.pop("c", 0.0)))
    if name == "hh_step":
        return D.hh_step(int(spec.pop("ramp_cells", D.RAMP_CELLS)))
    if name == "profile_trace":
        path = spec.pop("profile", None)
        if path is None:
            raise ConfigError("profile_trace needs a 'profile' CSV path")
        return D.profile_trace(Profile1D.from_csv(path))
    if spec:
        raise ConfigError(f"unknown boundary keys {sorted(spec)}")
    raise ConfigError(f"unknown boundary generator {name!r}")


def cmd_disk(cfg, out: Path) -> ExperimentResult:
    if cfg["n"] != 2:
        raise ConfigError("disk runs need n = 2")
    params = _params(cfg)
    try:
        grid = D.DiskGrid(cfg["R"], cfg["Nr"], cfg["Ntheta"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sol = D.solve_disk(params, _boundary(cfg["boundary"]), grid, cfg["tol"])
    sol.to_csv(out / "disk.csv")
    th = np.r_[grid.theta, 2 * np.pi]
    full = np.vstack([np.full(grid.Ntheta, sol.pole), sol.full])
    full = np.column_stack([full, full[:, :1]])
    r = np.r_[0.0, grid.r]
    Rg, Tg = np.meshgrid(r, th, indexing="ij")
    dat = write_dat(out / "disk.dat", {"x": Rg * np.cos(Tg), "y": Rg * np.sin(Tg), "u": full},
                    blocks=th.size)
    arts = ["disk.csv", "disk.json", dat.name, write_gp(out / "disk.gp", dat, "x", "y", "1:2:3", True).name]
    hull = sol.within_hull()
    claims = [Claim(0, "solution within the hull of the boundary data", str(hull), "True", hull)]
    data = {"grid": grid.to_dict(), "newton_steps": sol.newton_steps, "residual": sol.residual_norm,
            "pole": sol.pole, "symmetry_deviation": D.symmetry_deviation(sol, margin=cfg["margin"])}
    return ExperimentResult("disk", claims, data, arts)


def cmd_perturb(cfg, out: Path) -> ExperimentResult:
    if cfg["n"] != 2:
        raise ConfigError("perturbative runs need n = 2")
    params = _params(cfg)
    phi0 = [(int(m), float(c)) for m, c in cfg["phi0"]]
    base, tol = cfg["base"], cfg["tol"]
    if base == "zero":
        sol = PT.contract_elliptic(params, phi0, cfg["amplitude"], tol=tol)
    elif base == "parabolic_ode":
        try:
            sol = PT.contract_parabolic(params, phi0, cfg["amplitude"], tol=tol)
        except PT.MeanNotZero as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("base must be 'zero' or 'parabolic_ode'")
    sol.to_csv(out / "perturb.csv")
    a, b = sol.coords
    A, B = np.meshgrid(a, b)
    dat = write_dat(out / "perturb.dat", {"x_or_r": A.T, "y_or_theta": B.T, "u": sol.total.T}, blocks=b.size)
    arts = ["perturb.csv", "perturb.json", dat.name,
            write_gp(out / "perturb.gp", dat, "x_or_r", "y_or_theta", "1:2:3", True).name]
    claims = [Claim(9, "contraction ratio", sol.max_ratio, "< 1", sol.max_ratio < 1),
              Claim(9, "nonlinear residual", sol.residual, f"< {10 * tol:g}", sol.residual < 10 * tol)]
    if base == "parabolic_ode":
        d = sol.cusp_form_defect()
        claims.append(Claim(9, "cusp-form defect", d, "< 1e-10", d < 1e-10))
    data = {"iterations": sol.iterations, "contraction_history": sol.contraction_history,
            "residual": sol.residual}
    if base == "parabolic_ode":
        data["mode_condition_numbers"] = PT.strip_condition_numbers(params)
    return ExperimentResult("perturb", claims, data, arts)


def cmd_verify(cfg, out: Path) -> ExperimentResult:
    threads = int(os.environ.get("HYPAC_THREADS", "1") or 1)
    only = cfg["criteria"]
    if only is not None and not set(only) <= set(V.CRITERIA):
        raise ConfigError(f"criteria must be drawn from {sorted(V.CRITERIA)}")
    claims = V.run_all(cfg["quick"], only, threads)
    for c in claims:
        print(c.line())
    return ExperimentResult("verify-all", claims, {"quick": cfg["quick"], "threads": threads})


COMMANDS = {"roots": cmd_roots, "radial": cmd_radial, "parabolic": cmd_parabolic,
            "hyperbolic": cmd_hyperbolic, "disk": cmd_disk, "perturb": cmd_perturb,
            "verify-all": cmd_verify}


def run(cfg: dict) -> int:
    """Execute a resolved configuration and write all artifacts; returns the exit status."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(cfg, indent=2, sort_keys=True))
    t0 = time.perf_counter()
    try:
        result = COMMANDS[cfg["command"]](cfg, out)
    except (ConfigError, SolverError):
        raise
    except ComplexRootsError as exc:
        raise ConfigError(str(exc)) from exc
    except (RuntimeError, ValueError, ArithmeticError) as exc:
        raise SolverError(f"{type(exc).__name__}: {exc}") from exc
    result.data["runtime"] = time.perf_counter() - t0
    emit_report([result], out)
    print(format_table(result.claims))
    return EXIT_OK if result.passed else EXIT_ASSERT


# ------------------------------------------------------------------ parser --

def _list_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"expected a JSON list, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypac", description="Symmetric solutions of Allen-Cahn type equations on hyperbolic space.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, help="JSON config (flags override its keys)")
        s.add_argument("--n", type=int)
        s.add_argument("--k", type=float, help="cubic coefficient of f(u) = k u (u^2 - 1)")
        s.add_argument("--out", type=str, help="output directory")
        return s

    add("roots", "indicial roots and their ordering")
    s = add("radial", "radial shooting family")
    s.add_argument("--a", type=_list_arg, help="JSON list of initial values u(0)")
    s.add_argument("--r-max", dest="r_max", type=float)
    s.add_argument("--tol", type=float)
    s = add("parabolic", "horospherical ODE: connection, explicit check, certificate, threshold")
    s.add_argument("--check-explicit", dest="check_explicit", action="store_true", default=None)
    s.add_argument("--certificate", action="store_true", default=None)
    s.add_argument("--threshold", action="store_true", default=None)
    s.add_argument("--tol", type=float)
    s = add("hyperbolic", "hypersurface-symmetric boundary value problem")
    s.add_argument("--T", type=float)
    s.add_argument("--N", type=int)
    s.add_argument("--method", choices=("minimize", "newton", "both"))
    s.add_argument("--tol", type=float)
    s.add_argument("--continuation", type=_list_arg, help="JSON list of increasing T values")
    s = add("disk", "two-dimensional Dirichlet problem on a geodesic disk")
    s.add_argument("--R", type=float)
    s.add_argument("--Nr", type=int)
    s.add_argument("--Ntheta", type=int)
    s.add_argument("--boundary", type=json.loads, help='JSON object, e.g. {"name": "constant", "c": 1}')
    s.add_argument("--margin", type=float)
    s.add_argument("--tol", type=float)
    s = add("perturb", "perturbative non-symmetric families")
    s.add_argument("--base", choices=("zero", "parabolic_ode"))
    s.add_argument("--phi0", type=_list_arg, help="JSON list of [mode, coefficient] pairs")
    s.add_argument("--amplitude", type=float)
    s.add_argument("--tol", type=float)
    s = add("verify-all", "run the acceptance suite")
    s.add_argument("--quick", action="store_true", default=None)
    s.add_argument("--criteria", type=_list_arg, help="JSON list of criterion numbers")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_cfg = None
        if args.config is not None:
            file_cfg = json.loads(args.config.read_text())
            if not isinstance(file_cfg, dict):
                raise ConfigError("config file must hold a JSON object")
        cfg = resolve_config(args.command, file_cfg, flags)
        return run(cfg)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"hypac: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"hypac: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
