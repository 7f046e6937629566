"""Time integrators for the semi-discrete wave equation.

Two forms are supported.

Second-order form, for a real scalar field and cosine forcing::

    w_tt = -L w - f cos(omega_f t)

advanced with the three-level modified-equation scheme of order ``2m``::

    w^{n+1} = 2 w^n - w^{n-1}
              + 2 sum_{k=1}^m c_k [ L^k w^n + cos(omega_f t_n) g_k ],
    c_k = (-1)^k dt^{2k} / (2k)!,
    g_k = sum_{l=0}^{k-1} omega^{2(k-l-1)} L^l f.

First-order form, for the pair ``y = (w, w_t)``::

    w_tt = -L w - (eta + D) w_t - F(t)

advanced with classical RK4 with forcing sampled at the stage times. ``D``
is the impedance boundary damping carried by the operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .discretization import DiscreteLaplacian
from .errors import InstabilityError, ParameterError

__all__ = [
    "StepPlan",
    "stable_dt",
    "plan_for_cfl",
    "me_coefficients",
    "me_forcing_vector",
    "me_initial_back_step",
    "me_step",
    "first_order_step",
    "run_me",
    "run_first_order",
]

NAN_CHECK_EVERY = 64


@dataclass(frozen=True)
class StepPlan:
    """Uniform steps over one period ``T = 2 pi / omega``."""

    omega: float
    n_steps: int
    cfl_factor: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ParameterError("omega must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError("n_steps must be a positive integer")
        if not 0 < self.cfl_factor <= 1:
            raise ParameterError("cfl_factor must lie in (0, 1]")

    @property
    def T(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def accuracy_ok(self) -> bool:
        """Whether ``dt * omega <= 1``."""
        return self.dt * self.omega <= 1.0

    def trapezoid_weights(self) -> np.ndarray:
        """Trapezoidal weights ``eta_n``: 1/2 at both ends, 1 elsewhere."""
        w = np.ones(self.n_steps + 1)
        w[0] = w[-1] = 0.5
        return w


def _spectral_radius_bound(L: DiscreteLaplacian, eta: float = 0.0) -> float:
    lam = math.sqrt(L.gershgorin_bound())
    return lam + eta + float(np.max(L.damping, initial=0.0))


def stable_dt(
    L: DiscreteLaplacian, omega: float, m: int = 1, cfl_factor: float = 1.0, eta: float = 0.0
) -> StepPlan:
    """Largest uniform step satisfying ``dt < 2 / (lambda_N + 2 omega / pi)``.

    ``lambda_N`` is bounded through Gershgorin row sums. With damping, the
    viscous and boundary damping rates are added to the bound. The step is
    then shrunk so that a whole number of steps fits in one period.
    """
    if not 1 <= m <= 6:
        raise ParameterError("order parameter m must be in 1..6")
    if not 0 < cfl_factor <= 1:
        raise ParameterError("cfl_factor must lie in (0, 1]")
    T = 2.0 * math.pi / omega
    dt = cfl_factor * 2.0 / (_spectral_radius_bound(L, eta) + 2.0 * omega / math.pi)
    return StepPlan(omega, int(math.ceil(T / dt * (1.0 - 1e-14))), cfl_factor)


def plan_for_cfl(h: float, c_max: float, omega: float, cfl: float) -> StepPlan:
    """Plan with ``c_max dt / h <= cfl``."""
    if not cfl > 0:
        raise ParameterError("cfl must be positive")
    T = 2.0 * math.pi / omega
    return StepPlan(omega, int(math.ceil(T * c_max / (cfl * h) * (1.0 - 1e-14))), min(cfl, 1.0))


# ---------------------------------------------------------------------------
# Modified-equation scheme
# ---------------------------------------------------------------------------


def me_coefficients(m: int, dt: float) -> np.ndarray:
    """``c_k = (-1)^k dt^{2k} / (2k)!`` for ``k = 1..m``."""
    if not 1 <= m <= 6:
        raise ParameterError("order parameter m must be in 1..6")
    return np.array([(-1) ** k * dt ** (2 * k) / math.factorial(2 * k) for k in range(1, m + 1)])


def _powers(L: DiscreteLaplacian, v: np.ndarray, m: int) -> list:
    out = [v]
    for _ in range(m):
        out.append(L @ out[-1])
    return out


def me_forcing_vector(f: np.ndarray, omega: float, m: int, dt: float, L: DiscreteLaplacian) -> np.ndarray:
    """``sum_k c_k g_k``, the cosine-weighted forcing part of one step (without the factor 2)."""
    c = me_coefficients(m, dt)
    Lf = _powers(L, np.asarray(f, dtype=float), m - 1)
    out = np.zeros_like(Lf[0])
    for k in range(1, m + 1):
        g = sum(omega ** (2 * (k - l - 1)) * Lf[l] for l in range(k))
        out = out + c[k - 1] * g
    return out


def me_initial_back_step(
    v: np.ndarray, f: np.ndarray, omega: float, m: int, dt: float, L: DiscreteLaplacian
) -> np.ndarray:
    """Taylor value of ``w(-dt)`` for ``w(0) = v``, ``w_t(0) = 0``.

    ``w^{-1} = v + sum_k c_k (L^k v + g_k)``; for ``m = 1`` this is
    ``v - dt^2 / 2 (L v + f)``.
    """
    c = me_coefficients(m, dt)
    Lv = _powers(L, np.asarray(v, dtype=float), m)
    out = Lv[0] + me_forcing_vector(f, omega, m, dt, L)
    for k in range(1, m + 1):
        out = out + c[k - 1] * Lv[k]
    return out


def me_step(
    w: np.ndarray,
    w_prev: np.ndarray,
    t: float,
    dt: float,
    L: DiscreteLaplacian,
    m: int = 1,
    f: Optional[np.ndarray] = None,
    omega: Optional[float] = None,
    forcing_omega: Optional[float] = None,
    forcing_vector: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One step of the order-``2m`` scheme from ``(w^{n-1}, w^n)`` at time ``t = t_n``.

    The forcing polynomial uses ``omega`` in its coefficients and oscillates
    at ``forcing_omega`` (default ``omega``). Pass a precomputed
    ``forcing_vector`` from :func:`me_forcing_vector` to skip its rebuild.
    """
    c = me_coefficients(m, dt)
    acc = np.zeros_like(w)
    p = w
    for k in range(m):
        p = L @ p
        acc = acc + c[k] * p
    if forcing_vector is None and f is not None:
        forcing_vector = me_forcing_vector(f, omega, m, dt, L)
    if forcing_vector is not None:
        wf = omega if forcing_omega is None else forcing_omega
        acc = acc + math.cos(wf * t) * forcing_vector
    return 2.0 * w - w_prev + 2.0 * acc


def run_me(
    v: np.ndarray,
    f: Optional[np.ndarray],
    omega: float,
    plan: StepPlan,
    L: DiscreteLaplacian,
    m: int = 1,
    forcing_omega: Optional[float] = None,
    weights: Optional[np.ndarray] = None,
):
    """March ``w(0) = v``, ``w_t(0) = 0`` over one period.

    Returns ``(w^M, sum_n weights[n] w^n)``; the sum is ``None`` when no
    weights are given.
    """
    dt, M = plan.dt, plan.n_steps
    c = me_coefficients(m, dt)
    two_c = 2.0 * c
    wf = omega if forcing_omega is None else forcing_omega
    v = np.asarray(v, dtype=float)
    if f is None:
        f = np.zeros_like(v)
    G = 2.0 * me_forcing_vector(f, omega, m, dt, L)
    has_forcing = bool(np.any(G))
    w_prev = me_initial_back_step(v, f, omega, m, dt, L)
    w = v.copy()
    acc = None if weights is None else weights[0] * w
    Lmat = L.matrix
    for n in range(M):
        p = Lmat @ w
        new = 2.0 * w - w_prev + two_c[0] * p
        for k in range(1, m):
            p = Lmat @ p
            new += two_c[k] * p
        if has_forcing:
            new += math.cos(wf * n * dt) * G
        w_prev, w = w, new
        if acc is not None:
            acc += weights[n + 1] * w
        if (n + 1) % NAN_CHECK_EVERY == 0 and not np.all(np.isfinite(w)):
            raise InstabilityError(f"non-finite values at step {n + 1}")
    if not np.all(np.isfinite(w)):
        raise InstabilityError(f"non-finite values at step {M}")
    return w, acc


# ---------------------------------------------------------------------------
# First-order form
# ---------------------------------------------------------------------------


ForcingFn = Callable[[float], np.ndarray]


def _rhs(L: DiscreteLaplacian, damp, y: np.ndarray, F) -> np.ndarray:
    out = np.empty_like(y)
    out[0] = y[1]
    a = -(L.matrix @ y[0])
    if damp is not None:
        a -= damp * y[1]
    if F is not None:
        a -= F
    out[1] = a
    return out


def _damping_vector(L: DiscreteLaplacian, eta: float):
    if eta < 0:
        raise ParameterError("damping eta must be non-negative")
    if eta == 0.0 and not L.has_damping:
        return None
    return eta + L.damping


def first_order_step(
    y: np.ndarray,
    t: float,
    dt: float,
    L: DiscreteLaplacian,
    forcing: Optional[ForcingFn] = None,
    eta: float = 0.0,
    step_index: int = 0,
) -> np.ndarray:
    """One RK4 step of ``(w, w_t)' = (w_t, -L w - (eta + D) w_t - F(t))``.

    ``y`` has shape ``(2, n)``. ``forcing(t)`` returns ``F(t)`` and is
    evaluated at ``t``, ``t + dt/2`` and ``t + dt``.
    """
    damp = _damping_vector(L, eta)
    y_next = _rk4(y, t, dt, L, damp, forcing)
    if not np.all(np.isfinite(y_next)):
        raise InstabilityError(f"non-finite values at step {step_index + 1}")
    return y_next


def _rk4(y, t, dt, L, damp, forcing):
    if forcing is None:
        F0 = Fh = F1 = None
    else:
        F0, Fh, F1 = forcing(t), forcing(t + 0.5 * dt), forcing(t + dt)
    k1 = _rhs(L, damp, y, F0)
    k2 = _rhs(L, damp, y + 0.5 * dt * k1, Fh)
    k3 = _rhs(L, damp, y + 0.5 * dt * k2, Fh)
    k4 = _rhs(L, damp, y + dt * k3, F1)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def run_first_order(
    y0: np.ndarray,
    plan: StepPlan,
    L: DiscreteLaplacian,
    forcing: Optional[ForcingFn] = None,
    eta: float = 0.0,
    weights: Optional[np.ndarray] = None,
):
    """March the pair ``y0`` over one period with RK4.

    Returns ``(y^M, sum_n weights[n] y^n)``; the sum is ``None`` without weights.
    """
    dt, M = plan.dt, plan.n_steps
    damp = _damping_vector(L, eta)
    dtype = np.result_type(y0, weights if weights is not None else float)
    y = np.array(y0, dtype=dtype)
    acc = None if weights is None else weights[0] * y
    for n in range(M):
        y = _rk4(y, n * dt, dt, L, damp, forcing)
        if acc is not None:
            acc += weights[n + 1] * y
        if (n + 1) % NAN_CHECK_EVERY == 0 and not np.all(np.isfinite(y)):
            raise InstabilityError(f"non-finite values at step {n + 1}")
    if not np.all(np.isfinite(y)):
        raise InstabilityError(f"non-finite values at step {M}")
    return y, acc
