"""Frequency shifts of the time discretization, direct solves and oracles."""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import DiscreteLaplacian, Grid1D
from .errors import ConvergenceError, ParameterError, ResonanceError

__all__ = [
    "me_symbol",
    "modified_frequency",
    "modified_frequency_bound",
    "corrected_frequency",
    "lambda_tilde",
    "direct_helmholtz_solve",
    "adversarial_initial_data",
    "operator_norm_estimate",
    "OrderFit",
    "fit_order",
    "damped_modal_solution",
]


def me_symbol(x, m: int):
    """``sum_{j=1}^m (-1)^{j+1} x^j / (2 (2j)!)`` with ``x = (dt lambda)^2``.

    The order-``2m`` scheme propagates a mode of frequency ``lambda`` at the
    frequency ``lambda_tilde`` with ``sin^2(lambda_tilde dt / 2) = me_symbol``.
    """
    if not 1 <= m <= 6:
        raise ParameterError("order parameter m must be in 1..6")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for j in range(m, 0, -1):  # Horner in x
        out = (out + (-1) ** (j + 1) / (2 * math.factorial(2 * j))) * x
    return out[()] if out.ndim == 0 else out


def _me_symbol_prime(x: float, m: int) -> float:
    return sum((-1) ** (j + 1) * j * x ** (j - 1) / (2 * math.factorial(2 * j)) for j in range(1, m + 1))


def modified_frequency(omega: float, dt: float, m: int = 1) -> float:
    """Frequency ``omega_tilde`` that the scheme propagates as ``omega``.

    Solves ``me_symbol((dt omega_tilde)^2) = sin^2(omega dt / 2)`` for a root
    in ``(0, 4)`` by bisection followed by Newton polishing. Requires
    ``0 < dt omega <= 1``.
    """
    if not (omega > 0 and dt > 0 and 0 < dt * omega <= 1.0):
        raise ParameterError(f"need 0 < dt*omega <= 1, got {dt * omega}")
    target = math.sin(omega * dt / 2) ** 2

    def p(x):
        return float(me_symbol(x, m)) - target

    lo, hi = 0.0, 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if p(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    x = 0.5 * (lo + hi)
    for _ in range(3):
        x -= p(x) / _me_symbol_prime(x, m)
    if abs(p(x)) > 1e-14:
        raise ConvergenceError(f"modified frequency residual {abs(p(x)):.3e}")
    return math.sqrt(x) / dt


def modified_frequency_bound(omega: float, dt: float, m: int = 1) -> float:
    """``5 / (2m+2)! dt^{2m} omega^{2m+1}``, a bound on ``|omega - omega_tilde|``."""
    return 5.0 / math.factorial(2 * m + 2) * dt ** (2 * m) * omega ** (2 * m + 1)


def lambda_tilde(lam, dt: float, m: int = 1):
    """Discrete propagation frequency ``(2/dt) asin(sqrt(me_symbol((dt lam)^2)))``.

    Defined for ``dt lam <= 2``.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ParameterError("frequencies must be non-negative")
    if np.any(dt * lam > 2.0 + 1e-12):
        raise ParameterError(f"dt*lambda = {float(np.max(dt * lam)):.4g} exceeds 2")
    s = me_symbol((dt * lam) ** 2, m)
    out = 2.0 / dt * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))
    return out[()] if out.ndim == 0 else out


def corrected_frequency(omega: float, dt: float, m: int = 1) -> float:
    """Forcing frequency ``omega_bar`` whose discrete solution is exact at ``omega``."""
    return float(lambda_tilde(omega, dt, m))


def direct_helmholtz_solve(
    L: DiscreteLaplacian, omega: float, f: np.ndarray, eta: float = 0.0
) -> np.ndarray:
    """Solve ``(omega^2 + i omega (eta + D)) u - L u = f`` by sparse LU.

    ``D`` is the impedance boundary damping stored on ``L``. Raises
    :class:`ResonanceError` when a pivot falls below ``1e-12`` times the
    matrix scale.
    """
    H = sp.diags(L.weights)
    shift = omega**2 + 1j * omega * (eta + L.damping)
    A = sp.csc_matrix(sp.diags(shift * L.weights) - L.stiffness.astype(complex))
    scale = abs(A).max()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:  # exactly singular
        raise ResonanceError(str(exc)) from exc
    if np.min(np.abs(lu.U.diagonal())) < 1e-12 * scale:
        raise ResonanceError("shifted Helmholtz matrix is numerically singular")
    u = lu.solve(np.asarray(H @ np.asarray(f, dtype=complex)))
    if not np.all(np.isfinite(u)):
        raise ResonanceError("non-finite solution")
    return u


def adversarial_initial_data(x: np.ndarray | Grid1D, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """Right-moving packet ``sin(omega x) (1 - cos(2 pi x))`` and ``v1 = -v0'``.

    Written as ``sin(omega x) - (sin((omega + 2 pi) x) + sin((omega - 2 pi) x)) / 2``.
    """
    if isinstance(x, Grid1D):
        x = x.x
    k = 2.0 * math.pi
    v0 = np.sin(omega * x) - 0.5 * (np.sin((omega + k) * x) + np.sin((omega - k) * x))
    dv0 = omega * np.cos(omega * x) - 0.5 * (
        (omega + k) * np.cos((omega + k) * x) + (omega - k) * np.cos((omega - k) * x)
    )
    return v0, -dv0


def operator_norm_estimate(problem, z0: np.ndarray) -> float:
    """``||S z0|| / ||z0||`` for the homogeneous iteration operator ``S``."""
    from .iteration import apply_S

    nrm = np.linalg.norm(z0)
    if nrm == 0.0:
        raise ParameterError("norm estimate needs a nonzero vector")
    return float(np.linalg.norm(apply_S(problem, z0)) / nrm)


class OrderFit(NamedTuple):
    slope: float
    intercept: float
    residual: float


def fit_order(hs: Sequence[float], errors: Sequence[float]) -> OrderFit:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.shape != errors.shape or hs.size < 2:
        raise ParameterError("need at least two matching samples")
    if np.any(hs <= 0) or np.any(errors <= 0):
        raise ParameterError("log fit needs strictly positive samples")
    A = np.column_stack([np.log(hs), np.ones(hs.size)])
    coef, res, *_ = np.linalg.lstsq(A, np.log(errors), rcond=None)
    resid = float(np.sqrt(res[0] / hs.size)) if res.size else 0.0
    return OrderFit(float(coef[0]), float(coef[1]), resid)


def damped_modal_solution(
    lam: float, omega: float, eta: float, v0: complex, v1: complex, f: complex
) -> tuple[Callable, Callable]:
    """Exact ``w`` and ``w_t`` for ``w'' + eta w' + lam^2 w = -f exp(-i omega t)``.

    With ``u = f / (omega^2 + i eta omega - lam^2)`` and
    ``a = sqrt(4 lam^2 - eta^2) / 2``::

        w = u (e^{-i omega t} - e^{-eta t/2} [cos a t + (eta - 2 i omega)/(2a) sin a t])
            + e^{-eta t/2} (v0 [cos a t + eta/(2a) sin a t] + v1 sin(a t) / a)

    Only the underdamped case ``eta < 2 lam`` is supported.
    """
    if not 0 <= eta < 2 * lam:
        raise ParameterError("need 0 <= eta < 2 lambda")
    u = f / (omega**2 + 1j * eta * omega - lam**2)
    a = math.sqrt(4 * lam**2 - eta**2) / 2
    A = v0 - u
    B = (v1 + 1j * omega * u + eta * A / 2) / a

    def w(t):
        t = np.asarray(t, dtype=float)
        e = np.exp(-eta * t / 2)
        return u * np.exp(-1j * omega * t) + e * (A * np.cos(a * t) + B * np.sin(a * t))

    def wt(t):
        t = np.asarray(t, dtype=float)
        e = np.exp(-eta * t / 2)
        hom = A * np.cos(a * t) + B * np.sin(a * t)
        dhom = -A * a * np.sin(a * t) + B * a * np.cos(a * t)
        return -1j * omega * u * np.exp(-1j * omega * t) + e * (dhom - eta / 2 * hom)

    return w, wt
