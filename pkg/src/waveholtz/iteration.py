"""Time-domain filtering iteration for the Helmholtz equation.

The discrete Helmholtz problem is ``(omega^2 + i omega eta) u - L u = f``.
One application of the filter map ``Pi`` solves the wave equation over one
period ``T = 2 pi / omega`` from the current iterate and filters the
trajectory in time. ``Pi`` is affine, ``Pi(x) = S x + b``, and its fixed point
reproduces ``u``. The fixed point can be reached by plain iteration or by
a Krylov solve of ``(I - S) x = b``.

Modes
-----
``simplified``
    Real forcing, iterate ``v`` with ``w(0) = v`` and ``w_t(0) = 0``. Uses
    the modified-equation scheme and the real filter
    ``(2/T)(cos(omega t) - 1/4)``. ``S`` is self-adjoint, so CG applies.
    With ``corrected=True`` the forcing oscillates at the corrected
    frequency and the filter is reweighted. The fixed point is then the
    discrete Helmholtz solution at ``omega`` exactly.
``general``
    Complex forcing, iterate ``(w(0), w_t(0)) = (Re u, omega Im u)``. Uses
    RK4 on the first-order system and the real filter on both components.
``damped``
    Viscous damping ``eta`` with the complex filter ``exp(i omega t) / T``.
    The iterate is ``(u, -i omega u)``. The field is complex; its real and
    imaginary parts evolve independently under the real operator.
``impedance``
    Undamped problem with impedance sides, solved through the equivalent
    Neumann problem on an extended interval and restricted back.

Impedance sides can also be handled without extension, in ``general`` or
``damped`` mode, through the boundary damping carried by the operator.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import krylov
from .analysis import corrected_frequency
from .discretization import (
    DiscreteLaplacian,
    ExtendedProblem,
    Grid1D,
    extend_problem,
    restrict,
)
from .errors import MisuseError, ParameterError, ShapeError
from .filtering import FilterKernel
from .timestepping import StepPlan, run_first_order, run_me

__all__ = [
    "MODES",
    "WaveHoltzProblem",
    "IterationLog",
    "AffineSystem",
    "SolveResult",
    "apply_pi",
    "apply_S",
    "apply_A",
    "compute_rhs",
    "fixed_point_solve",
    "reconstruct",
    "solve",
]

MODES = ("simplified", "general", "damped", "impedance")

# RK4 is stable on the imaginary axis up to |dt z| = 2 sqrt(2).
_RK4_LIMIT = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class WaveHoltzProblem:
    """A discrete Helmholtz problem together with its time discretization."""

    laplacian: DiscreteLaplacian
    omega: float
    forcing: np.ndarray
    plan: StepPlan
    mode: str = "simplified"
    eta: float = 0.0
    m: int = 1
    corrected: bool = False
    margin: Optional[float] = None
    kernel: FilterKernel = field(init=False, repr=False)
    omega_bar: float = field(init=False)
    extension: Optional[ExtendedProblem] = field(init=False, repr=False)

    def __post_init__(self):
        L = self.laplacian
        f = np.asarray(self.forcing)
        if f.shape != (L.n,):
            raise ShapeError(f"forcing has shape {f.shape}, expected ({L.n},)")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if abs(self.plan.omega - self.omega) > 1e-14 * self.omega:
            raise ParameterError("step plan is for a different frequency")
        if self.eta < 0:
            raise ParameterError("damping eta must be non-negative")
        if self.eta > 0 and self.mode != "damped":
            raise MisuseError("damping requires mode='damped'")
        if self.corrected and self.mode != "simplified":
            raise MisuseError("the corrected scheme is only available in simplified mode")
        if self.mode == "simplified":
            if np.iscomplexobj(f) and np.any(f.imag):
                raise MisuseError("simplified mode needs a real forcing")
            f = np.real(f)
            if L.has_damping:
                raise MisuseError("simplified mode does not support impedance sides")
            if not 1 <= self.m <= 6:
                raise ParameterError("order parameter m must be in 1..6")
        object.__setattr__(self, "forcing", f)

        omega_bar = self.omega
        extension = None
        if self.mode == "simplified":
            if self.corrected:
                omega_bar = corrected_frequency(self.omega, self.plan.dt, self.m)
                kernel = FilterKernel.corrected(self.plan, omega_bar)
            else:
                kernel = FilterKernel.standard(self.plan)
            self._check_stable(L, 2.0)
        elif self.mode == "damped":
            kernel = FilterKernel.damped(self.plan)
            self._check_stable(L, _RK4_LIMIT, self.eta)
        else:
            kernel = FilterKernel.standard(self.plan)
            if self.mode == "impedance":
                extension = self._build_extension()
                self._check_stable(extension.laplacian, _RK4_LIMIT)
            else:
                self._check_stable(L, _RK4_LIMIT)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "omega_bar", omega_bar)
        object.__setattr__(self, "extension", extension)

    def _check_stable(self, L: DiscreteLaplacian, limit: float, eta: float = 0.0) -> None:
        rate = math.sqrt(L.gershgorin_bound()) + eta + float(np.max(L.damping, initial=0.0))
        if self.plan.dt * rate > limit * (1 + 1e-12):
            raise ParameterError(
                f"time step {self.plan.dt:.3e} is unstable (dt * rate = {self.plan.dt * rate:.3f})"
            )

    def _build_extension(self) -> ExtendedProblem:
        L = self.laplacian
        if not isinstance(L.grid, Grid1D) or L.bc is None or not L.bc.has_impedance:
            raise MisuseError("impedance mode needs a 1D operator with impedance sides")
        z = np.zeros(L.n)
        return extend_problem(L.grid, L.speed, L.bc, z, z, self.forcing, self.plan.T, self.margin)

    @property
    def n(self) -> int:
        return self.laplacian.n

    @property
    def shape(self) -> tuple:
        return (self.n,) if self.mode == "simplified" else (2, self.n)

    @property
    def dtype(self):
        return complex if self.mode == "damped" else float

    @property
    def has_forcing(self) -> bool:
        return bool(np.any(self.forcing))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=self.dtype)

    def homogeneous(self) -> "WaveHoltzProblem":
        """Same problem with zero forcing."""
        return self.with_forcing(np.zeros_like(self.forcing))

    def with_forcing(self, f: np.ndarray) -> "WaveHoltzProblem":
        kwargs = {
            fld.name: getattr(self, fld.name) for fld in dataclasses.fields(self) if fld.init
        }
        kwargs["forcing"] = f
        return WaveHoltzProblem(**kwargs)


def _cos_sin_forcing(omega: float, f: np.ndarray):
    """``F(t) = Re(f exp(-i omega t)) = Re f cos + Im f sin``."""
    fr = np.real(f).astype(float)
    fi = np.imag(f).astype(float) if np.iscomplexobj(f) else np.zeros_like(fr)
    if not (np.any(fr) or np.any(fi)):
        return None
    if not np.any(fi):
        return lambda t: math.cos(omega * t) * fr
    return lambda t: math.cos(omega * t) * fr + math.sin(omega * t) * fi


def _complex_forcing(omega: float, f: np.ndarray):
    """``F(t) = f exp(-i omega t)``."""
    f = np.asarray(f, dtype=complex)
    if not np.any(f):
        return None
    return lambda t: np.exp(-1j * omega * t) * f


def _check_iterate(problem: WaveHoltzProblem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != problem.shape:
        raise ShapeError(f"iterate has shape {x.shape}, expected {problem.shape}")
    if problem.mode != "damped" and np.iscomplexobj(x):
        if np.any(x.imag):
            raise ShapeError(f"{problem.mode} mode iterates are real")
        x = x.real
    return x


def apply_pi(problem: WaveHoltzProblem, x: np.ndarray) -> np.ndarray:
    """One filter application ``Pi(x)``."""
    x = _check_iterate(problem, x)
    p = problem
    L = p.laplacian
    w = p.kernel.samples
    if p.mode == "simplified":
        _, acc = run_me(x, p.forcing, p.omega, p.plan, L, p.m, forcing_omega=p.omega_bar, weights=w)
        return acc
    if p.mode == "general":
        _, acc = run_first_order(x, p.plan, L, _cos_sin_forcing(p.omega, p.forcing), weights=w)
        return acc
    if p.mode == "damped":
        F = _complex_forcing(p.omega, p.forcing)
        _, acc = run_first_order(x.astype(complex), p.plan, L, F, eta=p.eta, weights=w)
        return acc
    ep = p.extension
    v0, v1, _ = ep.extend(x[0], x[1])
    F = _cos_sin_forcing(p.omega, ep.f)
    _, acc = run_first_order(np.stack([v0, v1]), p.plan, ep.laplacian, F, weights=w)
    return restrict(ep, acc)


def compute_rhs(problem: WaveHoltzProblem) -> np.ndarray:
    """Affine part ``b = Pi(0)``."""
    return apply_pi(problem, problem.zeros())


def apply_S(problem: WaveHoltzProblem, x: np.ndarray) -> np.ndarray:
    """Linear part ``S x``; only defined for problems without forcing."""
    if problem.has_forcing:
        raise MisuseError("apply_S needs zero forcing; use problem.homogeneous()")
    return apply_pi(problem, x)


def apply_A(problem: WaveHoltzProblem, x: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
    """``A x = x - Pi(x) + b = (I - S) x``."""
    b = compute_rhs(problem) if b is None else b
    return x - apply_pi(problem, x) + b


@dataclass
class AffineSystem:
    """``(I - S) x = b`` in flattened form for the Krylov solvers."""

    problem: WaveHoltzProblem
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        self.b = compute_rhs(self.problem)

    @property
    def rhs(self) -> np.ndarray:
        return self.b.ravel()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        X = x.reshape(self.problem.shape)
        if self.problem.mode != "damped":
            X = X.real if np.iscomplexobj(X) else X
        return (X - apply_pi(self.problem, X) + self.b).ravel()

    def unflatten(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(self.problem.shape)


@dataclass
class IterationLog:
    residuals: list = field(default_factory=list)
    converged: bool = False
    rate: float = float("nan")
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.residuals)


def _tail_rate(residuals, window: int) -> float:
    r = np.asarray(residuals[-window:], dtype=float)
    r = r[r > 0]
    if r.size < 2:
        return float("nan")
    slope = np.polyfit(np.arange(r.size), np.log(r), 1)[0]
    return float(np.exp(slope))


def fixed_point_solve(
    problem: WaveHoltzProblem,
    tol: float = 1e-10,
    max_iter: int = 1000,
    x0: Optional[np.ndarray] = None,
    rate_window: int = 10,
):
    """Iterate ``x <- Pi(x)`` until ``||x_new - x|| <= tol ||x_new||``.

    Returns ``(x, log)``. ``log.residuals`` holds ``||x_new - x||`` and
    ``log.rate`` is a geometric fit over the last ``rate_window`` residuals.
    Hitting ``max_iter`` returns ``converged=False`` without raising.
    """
    start = time.perf_counter()
    x = problem.zeros() if x0 is None else _check_iterate(problem, x0).astype(problem.dtype)
    log = IterationLog()
    for _ in range(max_iter):
        x_new = apply_pi(problem, x)
        r = float(np.linalg.norm(x_new - x))
        log.residuals.append(r)
        x = x_new
        if r <= tol * np.linalg.norm(x_new):
            log.converged = True
            break
    log.rate = _tail_rate(log.residuals, rate_window)
    log.wall_time = time.perf_counter() - start
    return x, log


def reconstruct(problem: WaveHoltzProblem, x: np.ndarray) -> np.ndarray:
    """Complex Helmholtz solution represented by the iterate ``x``."""
    if problem.mode == "simplified":
        return np.asarray(x, dtype=complex)
    if problem.mode == "damped":
        return np.asarray(x[0], dtype=complex)
    return x[0] + 1j * x[1] / problem.omega


@dataclass
class SolveResult:
    x: np.ndarray
    u: np.ndarray
    converged: bool
    residuals: list
    iterations: int
    report: object = None


def solve(
    problem: WaveHoltzProblem,
    method: str = "gmres",
    tol: float = 1e-10,
    max_iter: int = 500,
) -> SolveResult:
    """Solve with ``"fixed-point"``, ``"cg"`` (simplified mode only) or ``"gmres"``."""
    if method == "fixed-point":
        x, log = fixed_point_solve(problem, tol=tol, max_iter=max_iter)
        return SolveResult(x, reconstruct(problem, x), log.converged, log.residuals, log.iterations, log)
    system = AffineSystem(problem)
    if method == "cg":
        if problem.mode != "simplified":
            raise MisuseError("CG needs the self-adjoint simplified iteration")
        xf, rep = krylov.cg(system.matvec, system.rhs, tol=tol, max_iter=max_iter,
                            weights=problem.laplacian.weights)
    elif method == "gmres":
        xf, rep = krylov.gmres(system.matvec, system.rhs, tol=tol, max_iter=max_iter)
    else:
        raise ParameterError(f"unknown method {method!r}")
    x = system.unflatten(xf)
    if problem.mode != "damped":
        x = np.real(x)
    return SolveResult(x, reconstruct(problem, x), rep.converged, rep.residuals, rep.iterations, rep)
