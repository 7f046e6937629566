"""Command line entry points for solves and parameter studies.

Every subcommand reads an optional JSON configuration, writes CSV files with
17 significant digits to ``--out`` and exits with

* 0 on success,
* 1 on a configuration error,
* 2 when a solve does not converge,
* 3 when a checked bound is violated.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from .analysis import (
    adversarial_initial_data,
    corrected_frequency,
    direct_helmholtz_solve,
    fit_order,
    modified_frequency,
    modified_frequency_bound,
    operator_norm_estimate,
)
from .discretization import (
    BoundarySpec,
    Grid1D,
    Grid2D,
    Impedance,
    WaveSpeedField,
    build_laplacian_1d,
    build_laplacian_2d,
    dirichlet_lift_1d,
)
from .errors import ConfigError, WaveHoltzError
from .filtering import PAIR_CONSTANTS, SCALAR_CONSTANTS, check_filter_bounds
from .iteration import MODES, WaveHoltzProblem, fixed_point_solve, solve
from .timestepping import StepPlan, plan_for_cfl, stable_dt

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_BOUND = 0, 1, 2, 3

DEFAULT_PPW = 50
DEFAULT_CFL = 0.1
DEFAULT_GMRES_TOL = 1e-10
DEFAULT_FIXED_POINT_TOL = 1e-13


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)


def _parallel_map(fn: Callable, items: list, workers: int) -> list:
    """Order-preserving map, in worker processes when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def load_config(path: Optional[str], required: bool = True) -> dict:
    if path is None:
        if required:
            raise ConfigError("this command needs --config")
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _get(cfg: dict, key: str, kind, default=None, required: bool = False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing config key {key!r}")
        return default
    value = cfg[key]
    try:
        if kind is float:
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if kind is list:
            if not isinstance(value, list):
                raise ValueError
            return value
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} has invalid value {value!r}") from exc


def _eta_for(rule: Any, omega: float) -> float:
    """``rule`` is a number or ``{"rule": "scaled"|"inverse"|"const", ...}``."""
    if rule is None:
        return 0.0
    if isinstance(rule, (int, float)):
        return float(rule)
    if not isinstance(rule, dict):
        raise ConfigError(f"invalid eta rule {rule!r}")
    kind = rule.get("rule", "const")
    if kind == "const":
        return float(rule.get("value", 0.0))
    if kind == "scaled":
        return float(rule.get("factor", 0.5)) * omega
    if kind == "inverse":
        return float(rule.get("factor", 1.0)) / omega
    raise ConfigError(f"unknown eta rule {kind!r}")


def _bc_from(cfg: dict, dim: int) -> BoundarySpec:
    code = cfg.get("bc", "D" * (2 * dim))
    if isinstance(code, list):
        code = "".join(code)
    ratio = float(cfg.get("impedance_ratio", 1.0))
    try:
        bc = BoundarySpec.from_code(str(code), Impedance.from_ratio(ratio))
    except WaveHoltzError as exc:
        raise ConfigError(str(exc)) from exc
    if bc.dim != dim:
        raise ConfigError(f"bc {code!r} does not match dimension {dim}")
    return bc


def _grid_from(cfg: dict, omega: float):
    dim = _get(cfg, "dim", int, 1)
    c = _get(cfg, "c", float, 1.0)
    if c <= 0:
        raise ConfigError("wave speed c must be positive")
    if dim == 1:
        dom = _get(cfg, "domain", list, [0.0, 1.0])
        if len(dom) != 2:
            raise ConfigError("1D domain must be [a, b]")
        extents = [(float(dom[0]), float(dom[1]))]
    elif dim == 2:
        dom = _get(cfg, "domain", list, [[0.0, 1.0], [0.0, 1.0]])
        if len(dom) != 2 or any(len(d) != 2 for d in dom):
            raise ConfigError("2D domain must be [[x0, x1], [y0, y1]]")
        extents = [(float(d[0]), float(d[1])) for d in dom]
    else:
        raise ConfigError("dim must be 1 or 2")
    grids = []
    for a, b in extents:
        if b <= a:
            raise ConfigError(f"empty interval [{a}, {b}]")
        if "n_nodes" in cfg:
            n = _get(cfg, "n_nodes", int)
            if n < 3:
                raise ConfigError("n_nodes must be at least 3")
            grids.append(Grid1D(a, b, n))
        else:
            ppw = _get(cfg, "ppw", float, DEFAULT_PPW)
            if ppw <= 0:
                raise ConfigError("ppw must be positive")
            grids.append(Grid1D.from_spacing(a, b, 2 * math.pi * c / (omega * ppw)))
    grid = grids[0] if dim == 1 else Grid2D(grids[0], grids[1])
    return grid, WaveSpeedField.constant(grid, c)


def _forcing_from(spec: Any, L, omega: float) -> np.ndarray:
    spec = spec or {"type": "gaussian"}
    if not isinstance(spec, dict):
        raise ConfigError("forcing must be an object")
    kind = spec.get("type", "gaussian")
    pts = L.nodes()
    if kind == "zero":
        return np.zeros(L.n)
    if kind == "gaussian":
        amp = complex(spec.get("amplitude", 1.0)) * np.exp(1j * float(spec.get("phase", 0.0)))
        width = float(spec.get("width", 0.1))
        center = spec.get("center", 0.5)
        if pts.ndim == 1:
            r2 = (pts - float(center)) ** 2
        else:
            cx, cy = (center, center) if np.isscalar(center) else center
            r2 = (pts[:, 0] - float(cx)) ** 2 + (pts[:, 1] - float(cy)) ** 2
        f = amp * np.exp(-r2 / width**2)
        return f.real if amp.imag == 0 else f
    if kind == "omega_gaussian":
        r2 = pts**2 if pts.ndim == 1 else np.sum(pts**2, axis=1)
        return omega**2 * np.exp(-(omega**2) * r2)
    if kind == "constant_solution":
        value = float(spec.get("value", 1.0))
        f = np.full(L.n, omega**2 * value)
        if L.dim == 1 and L.bc is not None:
            lo, hi = (value if s.kind == "dirichlet" else 0.0 for s in L.bc.sides)
            f = f - dirichlet_lift_1d(L, lo, hi)
        elif L.bc is not None and any(s.kind == "dirichlet" for s in L.bc.sides):
            raise ConfigError("constant_solution with Dirichlet sides is 1D only")
        return f
    raise ConfigError(f"unknown forcing type {kind!r}")


def build_problem(cfg: dict) -> WaveHoltzProblem:
    """Problem described by a ``solve`` configuration."""
    omega = _get(cfg, "omega", float, required=True)
    if omega <= 0:
        raise ConfigError("omega must be positive")
    mode = str(cfg.get("mode", "simplified"))
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    grid, c = _grid_from(cfg, omega)
    dim = 1 if isinstance(grid, Grid1D) else 2
    bc = _bc_from(cfg, dim)
    eta = _eta_for(cfg.get("eta"), omega)
    try:
        L = build_laplacian_1d(grid, c, bc) if dim == 1 else build_laplacian_2d(grid, c, bc)
        m = _get(cfg, "m", int, 1)
        if "steps_per_period" in cfg:
            plan = StepPlan(omega, _get(cfg, "steps_per_period", int))
        else:
            plan = stable_dt(L, omega, m, _get(cfg, "cfl", float, DEFAULT_CFL), eta=eta)
        f = _forcing_from(cfg.get("forcing"), L, omega)
        return WaveHoltzProblem(
            L, omega, f, plan, mode=mode, eta=eta, m=m, corrected=bool(cfg.get("corrected", False))
        )
    except ConfigError:
        raise
    except WaveHoltzError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    method = str(cfg.get("solver", "gmres"))
    if method not in ("gmres", "cg", "fixed-point"):
        raise ConfigError(f"unknown solver {method!r}")
    default_tol = DEFAULT_FIXED_POINT_TOL if method == "fixed-point" else DEFAULT_GMRES_TOL
    tol = _get(cfg, "tol", float, default_tol)
    max_iter = _get(cfg, "max_iter", int, 1000 if method == "fixed-point" else 500)
    try:
        res = solve(problem, method, tol=tol, max_iter=max_iter)
    except WaveHoltzError as exc:
        if isinstance(exc, ConfigError):
            raise
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    out = Path(args.out)
    pts = problem.laplacian.nodes()
    if pts.ndim == 1:
        write_csv(out / "solution.csv", ["x", "re_u", "im_u"],
                  zip(pts, res.u.real, res.u.imag))
    else:
        write_csv(out / "solution.csv", ["x", "y", "re_u", "im_u"],
                  zip(pts[:, 0], pts[:, 1], res.u.real, res.u.imag))
    write_csv(out / "log.csv", ["iter", "residual"], enumerate(res.residuals))
    summary = {"converged": res.converged, "iterations": res.iterations, "method": method,
               "omega": problem.omega, "mode": problem.mode, "n_dofs": problem.n,
               "n_steps": problem.plan.n_steps, "seed": args.seed}
    if cfg.get("compare_direct", False):
        ud = direct_helmholtz_solve(problem.laplacian, problem.omega, problem.forcing, problem.eta)
        summary["relative_error_vs_direct"] = float(np.linalg.norm(res.u - ud) / np.linalg.norm(ud))
    _write_json(out / "summary.json", summary)
    print(f"{'converged' if res.converged else 'NOT converged'} after {res.iterations} iterations")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _sweep_task(task: tuple) -> tuple:
    base, omega, code = task
    cfg = dict(base)
    cfg["omega"] = omega
    cfg["bc"] = code
    cfg["mode"] = "damped"
    cfg.setdefault("forcing", {"type": "omega_gaussian"})
    cfg.setdefault("ppw", 20)
    cfg.setdefault("cfl", 0.5)
    eta = _eta_for(cfg.get("eta", {"rule": "scaled", "factor": 0.5}), omega)
    cfg["eta"] = eta
    problem = build_problem(cfg)
    try:
        res = solve(problem, "gmres", tol=_get(cfg, "tol", float, DEFAULT_GMRES_TOL),
                    max_iter=_get(cfg, "max_iter", int, 500))
        return (omega, eta, code, res.iterations, res.residuals[-1],
                "ok" if res.converged else "not_converged")
    except WaveHoltzError as exc:
        return (omega, eta, code, -1, float("nan"), f"failed: {exc}")


def cmd_sweep_damped(args) -> int:
    cfg = load_config(args.config)
    omegas = [float(w) for w in _get(cfg, "omegas", list, required=True)]
    if not omegas or any(w <= 0 for w in omegas):
        raise ConfigError("omegas must be a non-empty list of positive frequencies")
    dim = _get(cfg, "dim", int, 1)
    bcs = _get(cfg, "bcs", list, ["DD"] if dim == 1 else ["NNNN"])
    base = {k: v for k, v in cfg.items() if k not in ("omegas", "bcs")}
    base.setdefault("domain", [-6.0, 6.0] if dim == 1 else [[-1.0, 1.0], [-1.0, 1.0]])
    if dim == 2:
        # fixed-width source so every frequency sees the same spectral content
        base.setdefault("forcing", {"type": "gaussian", "center": [0.1, -0.2], "width": 0.2})
    for code in bcs:  # validate before dispatching work
        _bc_from({"bc": code}, dim)
    tasks = [(base, w, str(code)) for code in bcs for w in omegas]
    rows = _parallel_map(_sweep_task, tasks, args.workers)
    write_csv(Path(args.out) / "sweep_damped.csv",
              ["omega", "eta", "bc", "iterations", "residual", "status"], rows)
    spreads = {}
    for code in bcs:
        its = [r[3] for r in rows if r[2] == code and r[5] == "ok"]
        spreads[str(code)] = (max(its) - min(its)) if its else None
    summary = {"iteration_spread": spreads, "seed": args.seed}
    if dim == 2:
        summary["label"] = "qualitative"
    _write_json(Path(args.out) / "summary.json", summary)
    for code, spread in spreads.items():
        print(f"{code}: iteration spread {spread}")
    return EXIT_OK if all(r[5] == "ok" for r in rows) else EXIT_NOT_CONVERGED


def _impedance_task(task: tuple) -> tuple:
    omega, cfg = task
    dom = cfg.get("domain", [0.0, 2.0])
    ppw = float(cfg.get("ppw", DEFAULT_PPW))
    cfl = float(cfg.get("cfl_number", DEFAULT_CFL))
    route = cfg.get("route", "direct")
    grid = Grid1D.from_spacing(float(dom[0]), float(dom[1]), 2 * math.pi / (omega * ppw))
    imp = Impedance.from_ratio(float(cfg.get("impedance_ratio", 1.0)))
    L = build_laplacian_1d(grid, WaveSpeedField.constant(grid), BoundarySpec((imp, imp)))
    plan = plan_for_cfl(grid.h, max(1.0, imp.ratio) if route == "extension" else 1.0, omega, cfl)
    mode = "impedance" if route == "extension" else "general"
    problem = WaveHoltzProblem(L, omega, np.zeros(L.n), plan, mode=mode)
    v0, v1 = adversarial_initial_data(grid, omega)
    nrm = operator_norm_estimate(problem, np.stack([v0, v1]))
    return (omega, nrm, 1.0 - nrm)


def cmd_impedance_norm(args) -> int:
    cfg = load_config(args.config, required=False)
    if "omegas" in cfg:
        omegas = [float(w) for w in _get(cfg, "omegas", list)]
    else:
        multiples = _get(cfg, "omegas_over_pi", list, list(range(10, 81, 5)))
        omegas = [float(k) * math.pi for k in multiples]
    if not omegas or any(w <= 0 for w in omegas):
        raise ConfigError("omegas must be a non-empty list of positive frequencies")
    if set(str(cfg.get("bc", "II"))) != {"I"}:
        raise ConfigError("impedance-norm needs impedance conditions on both sides")
    if cfg.get("route", "direct") not in ("direct", "extension"):
        raise ConfigError("route must be 'direct' or 'extension'")
    rows = _parallel_map(_impedance_task, [(w, cfg) for w in omegas], args.workers)
    write_csv(Path(args.out) / "impedance_norm.csv", ["omega", "norm_estimate", "one_minus_norm"], rows)
    summary = {"seed": args.seed}
    gaps = [r[2] for r in rows]
    if len(rows) >= 2 and all(g > 0 for g in gaps):
        fit = fit_order([r[0] for r in rows], gaps)
        summary["slope"] = fit.slope
        print(f"slope of log(1 - ||S z||/||z||) against log(omega): {fit.slope:.4f}")
    _write_json(Path(args.out) / "summary.json", summary)
    return EXIT_OK


def _convergence_task(task: tuple) -> tuple:
    m, n_steps, cfg = task
    omega = float(cfg.get("omega", 1.0))
    grid = Grid1D(0.0, 1.0, int(cfg.get("n_nodes", 9)))
    L = build_laplacian_1d(grid, WaveSpeedField.constant(grid), BoundarySpec.dirichlet())
    f = np.full(L.n, omega**2) - dirichlet_lift_1d(L, 1.0, 1.0)
    exact = direct_helmholtz_solve(L, omega, f).real
    plan = StepPlan(omega, n_steps)
    tol = float(cfg.get("tol", DEFAULT_FIXED_POINT_TOL))
    max_iter = int(cfg.get("max_iter", 2000))
    errs = []
    for corrected in (False, True):
        p = WaveHoltzProblem(L, omega, f, plan, m=m, corrected=corrected)
        x, log = fixed_point_solve(p, tol=tol, max_iter=max_iter)
        errs.append(float(np.max(np.abs(x - exact))) if log.converged else float("nan"))
    return (m, plan.dt, errs[0], errs[1])


def cmd_convergence_study(args) -> int:
    cfg = load_config(args.config, required=False)
    ms = [int(m) for m in _get(cfg, "ms", list, [1, 2])]
    halvings = _get(cfg, "halvings", int, 4)
    omega = _get(cfg, "omega", float, 1.0)
    n_nodes = _get(cfg, "n_nodes", int, 9)
    if halvings < 0 or n_nodes < 3 or omega <= 0 or any(not 1 <= m <= 6 for m in ms):
        raise ConfigError("invalid convergence study parameters")
    if "base_steps" in cfg:
        base = _get(cfg, "base_steps", int)
    else:
        grid = Grid1D(0.0, 1.0, n_nodes)
        L = build_laplacian_1d(grid, WaveSpeedField.constant(grid), BoundarySpec.dirichlet())
        base = stable_dt(L, omega).n_steps
    tasks = [(m, base * 2**k, cfg) for m in ms for k in range(halvings + 1)]
    rows = _parallel_map(_convergence_task, tasks, args.workers)
    footer = []
    slopes = {}
    if halvings + 1 >= 3:
        for m in ms:
            sub = [r for r in rows if r[0] == m]
            ok = [r for r in sub if np.isfinite(r[2]) and r[2] > 0]
            s = fit_order([r[1] for r in ok], [r[2] for r in ok]).slope if len(ok) >= 2 else float("nan")
            slopes[m] = s
            footer.append((m, "slope", s, ""))
    write_csv(Path(args.out) / "convergence.csv", ["m", "dt", "err_standard", "err_corrected"],
              list(rows) + footer)
    _write_json(Path(args.out) / "summary.json",
                {"slopes": {str(k): v for k, v in slopes.items()}, "seed": args.seed})
    if any(not np.isfinite(r[2]) or not np.isfinite(r[3]) for r in rows):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_filter_check(args) -> int:
    cfg = load_config(args.config, required=False)
    r_max = _get(cfg, "r_max", float, 20.0)
    n = _get(cfg, "n_points", int, 20001)
    if r_max <= 0 or n < 2:
        raise ConfigError("need r_max > 0 and n_points >= 2")
    rep = check_filter_bounds(np.linspace(0.0, r_max, n))
    out = Path(args.out)
    write_csv(out / "filter_check.csv", ["r", "beta_bar", "gamma_bar", "mu_abs", "bound_active", "slack"],
              zip(rep.r, rep.beta, rep.gamma, rep.mu_abs, rep.active, rep.slack))
    write_csv(out / "constants.csv", ["filter", "b0", "b1", "remainder_bound"], [
        ("pair", PAIR_CONSTANTS.b0, PAIR_CONSTANTS.b1, PAIR_CONSTANTS.remainder_bound),
        ("scalar", SCALAR_CONSTANTS.b0, SCALAR_CONSTANTS.b1, SCALAR_CONSTANTS.remainder_bound),
    ])
    print(f"{rep.violations} violations, minimum slack {rep.min_slack:.3e}")
    return EXIT_OK if rep.violations == 0 else EXIT_BOUND


def _modfreq_task(task: tuple) -> tuple:
    omega, dt, m = task
    wt = modified_frequency(omega, dt, m)
    wb = corrected_frequency(omega, dt, m)
    return (omega, dt, m, wt, wb, abs(omega - wt), modified_frequency_bound(omega, dt, m))


def cmd_modfreq(args) -> int:
    cfg = load_config(args.config, required=False)
    omegas = [float(w) for w in _get(cfg, "omegas", list, [1.0, 10.0])]
    dtw = [float(x) for x in _get(cfg, "dt_omega", list, [0.05, 0.1, 0.5])]
    ms = [int(m) for m in _get(cfg, "ms", list, [1, 2, 3])]
    if any(w <= 0 for w in omegas) or any(not 0 < x <= 1 for x in dtw) or any(not 1 <= m <= 6 for m in ms):
        raise ConfigError("need omega > 0, 0 < dt*omega <= 1 and m in 1..6")
    tasks = [(w, x / w, m) for w in omegas for x in dtw for m in ms]
    rows = _parallel_map(_modfreq_task, tasks, args.workers)
    write_csv(Path(args.out) / "modfreq.csv",
              ["omega", "dt", "m", "omega_tilde", "omega_bar", "err", "bound"], rows)
    bad = sum(1 for r in rows if r[5] > r[6])
    print(f"{bad} bound violations in {len(rows)} cases")
    return EXIT_OK if bad == 0 else EXIT_BOUND


COMMANDS = {
    "solve": (cmd_solve, "solve one Helmholtz problem from a JSON config"),
    "sweep-damped": (cmd_sweep_damped, "GMRES iteration counts for damped problems over a range of frequencies"),
    "impedance-norm": (cmd_impedance_norm, "norm of the impedance iteration on worst-case data"),
    "convergence-study": (cmd_convergence_study, "time step convergence of the standard and corrected schemes"),
    "filter-check": (cmd_filter_check, "evaluate the filter transfer bounds on a grid"),
    "modfreq": (cmd_modfreq, "modified and corrected frequencies with error bounds"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waveholtz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="PATH", help="JSON configuration file")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
        p.add_argument("--workers", metavar="N", type=int, default=os.cpu_count() or 1,
                       help="worker processes for sweeps (default: available CPUs)")
        p.add_argument("--seed", metavar="N", type=int, default=0,
                       help="seed for randomized probes (default: 0)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
