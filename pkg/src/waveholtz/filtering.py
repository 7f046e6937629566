"""Filter transfer functions and their discrete counterparts.

With ``r = lambda / omega`` the continuous filter applied to a mode of
frequency ``lambda`` has

    beta(r)  = (1 + 3r^2) sin(2 pi r) / (4 pi r (r^2 - 1))
    gamma(r) = (1 + 3r^2) sin^2(pi r) / (2 pi r (r^2 - 1))
    |mu(r)|  = |beta + i gamma| = (1 + 3r^2) |sin(pi r)| / (2 pi r |r^2 - 1|)

``beta`` is the scalar filter for a real field started at rest; ``beta +- i
gamma`` are the eigenvalues of the pair filter acting on ``(w, w_t)``. The
removable singularities at ``r = 0`` and ``r = 1`` are evaluated through
``numpy.sinc``, which is exact there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import FilterSingularityError, ParameterError
from .timestepping import StepPlan

__all__ = [
    "beta_bar",
    "gamma_bar",
    "mu_bar_abs",
    "FilterConstants",
    "PAIR_CONSTANTS",
    "SCALAR_CONSTANTS",
    "BoundReport",
    "check_filter_bounds",
    "FilterKernel",
    "discrete_beta",
    "discrete_gamma",
    "discrete_pair_transfer",
    "damped_filter_values",
    "damped_rate_bound",
]

_NEAR_ONE = 0.25


def _split(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ParameterError("r must be non-negative")
    return r, np.abs(r - 1.0) < _NEAR_ONE


def beta_bar(r):
    """Scalar filter transfer ``beta(r)``; ``beta(0) = -1/2``, ``beta(1) = 1``."""
    r, near = _split(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = (1 + 3 * r**2) * np.sinc(2 * r) / (2 * (r**2 - 1))
        close = (1 + 3 * r**2) * np.sinc(2 * (r - 1)) / (2 * r * (r + 1))
    out = np.where(near, close, far)
    return out[()] if out.ndim == 0 else out


def gamma_bar(r):
    """Quadrature part ``gamma(r)``; zero at ``r = 0`` and ``r = 1``."""
    r, near = _split(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = (1 + 3 * r**2) * math.pi * r * np.sinc(r) ** 2 / (2 * (r**2 - 1))
        close = (1 + 3 * r**2) * math.pi * (r - 1) * np.sinc(r - 1) ** 2 / (2 * r * (r + 1))
    out = np.where(near, close, far)
    return out[()] if out.ndim == 0 else out


def mu_bar_abs(r):
    """Modulus of the pair filter eigenvalues ``|beta +- i gamma|``."""
    r, near = _split(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = (1 + 3 * r**2) * np.abs(np.sinc(r)) / (2 * np.abs(r**2 - 1))
        close = (1 + 3 * r**2) * np.abs(np.sinc(r - 1)) / (2 * r * (r + 1))
    out = np.where(near, close, far)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class FilterConstants:
    """Constants of a filter near resonance and in its tail.

    ``|transfer(1 + d)| = 1 - b1 d^2 + O(d^3)`` with remainder below
    ``remainder_bound |d|^3``, and ``|transfer(r)| <= b0 / (r - 1)`` for ``r > 1``.
    """

    b0: float
    b1: float
    remainder_bound: float


PAIR_CONSTANTS = FilterConstants(
    b0=3 / (2 * math.pi),
    b1=math.pi**2 / 6 - 0.25,
    remainder_bound=25 * math.pi**4 / 4 * (36 + 20 * math.pi + 250 * math.pi**2 + 75 * math.pi**3),
)
SCALAR_CONSTANTS = FilterConstants(
    b0=3 / (4 * math.pi),
    b1=2 * math.pi**2 / 3 - 0.25,
    remainder_bound=10 * math.pi**3 / 9,
)


class BoundReport(NamedTuple):
    """Result of :func:`check_filter_bounds`.

    ``slack`` is the smallest margin over all bounds that apply at each
    sample point, and ``active`` names the bound that attains it.
    """

    r: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    mu_abs: np.ndarray
    active: np.ndarray
    slack: np.ndarray
    violations: int

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slack))


def check_filter_bounds(r: np.ndarray, tol: float = 1e-12) -> BoundReport:
    """Evaluate every pointwise filter bound on the sample points ``r``.

    Pair filter, ``d = r - 1``::

        |mu| <= 1 - (15/32) d^2        for |d| <= 1/2
        |mu| <= 7 / (3 pi)             for |d| >= 1/2
        |mu| <= b0 / (r - 1)           for r > 1

    Scalar filter::

        0 <= beta <= 1 - d^2 / 2       for |d| <= 1/2
        |beta| <= 1/2                  for |d| >= 1/2
        |beta| <= b0 / (r - 1)         for r > 1

    A point violates a bound when its margin is below ``-tol``; ``tol``
    absorbs rounding where a bound is attained exactly.
    """
    r = np.asarray(r, dtype=float)
    b, g, mu = beta_bar(r), gamma_bar(r), mu_bar_abs(r)
    d = r - 1.0
    inner = np.abs(d) <= 0.5
    outer = np.abs(d) >= 0.5
    tail = r > 1.0
    with np.errstate(divide="ignore"):
        tail_p = np.where(tail, PAIR_CONSTANTS.b0 / np.where(tail, d, 1.0), np.inf)
        tail_s = np.where(tail, SCALAR_CONSTANTS.b0 / np.where(tail, d, 1.0), np.inf)
    inf = np.full_like(r, np.inf)
    margins = {
        "pair_quadratic": np.where(inner, 1 - 15 / 32 * d**2 - mu, inf),
        "pair_plateau": np.where(outer, 7 / (3 * math.pi) - mu, inf),
        "pair_tail": np.where(tail, tail_p - mu, inf),
        "scalar_nonneg": np.where(inner, b, inf),
        "scalar_quadratic": np.where(inner, 1 - d**2 / 2 - b, inf),
        "scalar_plateau": np.where(outer, 0.5 - np.abs(b), inf),
        "scalar_tail": np.where(tail, tail_s - np.abs(b), inf),
    }
    names = np.array(list(margins))
    stack = np.vstack(list(margins.values()))
    k = np.argmin(stack, axis=0)
    slack = stack[k, np.arange(r.size)]
    violations = int(np.sum(stack < -tol))
    return BoundReport(r, b, g, mu, names[k], slack, violations)


# ---------------------------------------------------------------------------
# Discrete kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FilterKernel:
    """Sample weights ``sigma_n`` of a discrete filter on ``plan.times``.

    The filtered iterate is ``sum_n sigma_n w^n``.
    """

    plan: StepPlan
    samples: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.plan.times

    @classmethod
    def standard(cls, plan: StepPlan, omega: Optional[float] = None) -> "FilterKernel":
        """``(2 dt / T) eta_n (cos(omega t_n) - 1/4)``."""
        omega = plan.omega if omega is None else omega
        t = plan.times
        s = 2.0 * plan.dt / plan.T * plan.trapezoid_weights() * (np.cos(omega * t) - 0.25)
        return cls(plan, s)

    @classmethod
    def corrected(cls, plan: StepPlan, omega_bar: float, omega: Optional[float] = None) -> "FilterKernel":
        """Standard weights times ``cos(omega t_n) / cos(omega_bar t_n)``.

        A node with ``|cos(omega_bar t_n)| < 1e-6`` is rejected unless the
        numerator is no larger there, which happens when both cosines vanish
        at the same node and the ratio stays bounded by one.
        """
        omega = plan.omega if omega is None else omega
        t = plan.times
        num = np.cos(omega * t)
        den = np.cos(omega_bar * t)
        bad = (np.abs(den) < 1e-6) & (np.abs(num) > np.abs(den))
        if np.any(bad):
            n = int(np.flatnonzero(bad)[0])
            raise FilterSingularityError(f"|cos(omega_bar t_n)| < 1e-6 at n = {n}")
        base = cls.standard(plan, omega).samples
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(den == 0.0, 0.0, num / den)
        return cls(plan, base * ratio)

    @classmethod
    def damped(cls, plan: StepPlan, omega: Optional[float] = None) -> "FilterKernel":
        """Complex weights ``(dt / T) eta_n exp(i omega t_n)``."""
        omega = plan.omega if omega is None else omega
        t = plan.times
        return cls(plan, plan.dt / plan.T * plan.trapezoid_weights() * np.exp(1j * omega * t))


def discrete_beta(lam_tilde, omega: float, plan: StepPlan, kernel: Optional[FilterKernel] = None):
    """Discrete scalar transfer ``sum_n sigma_n cos(lam_tilde t_n)``."""
    kernel = FilterKernel.standard(plan, omega) if kernel is None else kernel
    lt = np.atleast_1d(np.asarray(lam_tilde, dtype=float))
    out = np.cos(np.outer(lt, kernel.times)) @ kernel.samples
    return out[0] if np.ndim(lam_tilde) == 0 else out


def discrete_gamma(lam_tilde, omega: float, plan: StepPlan, kernel: Optional[FilterKernel] = None):
    """Discrete quadrature transfer ``sum_n sigma_n sin(lam_tilde t_n)``."""
    kernel = FilterKernel.standard(plan, omega) if kernel is None else kernel
    lt = np.atleast_1d(np.asarray(lam_tilde, dtype=float))
    out = np.sin(np.outer(lt, kernel.times)) @ kernel.samples
    return out[0] if np.ndim(lam_tilde) == 0 else out


def discrete_pair_transfer(lam: float, plan: StepPlan, kernel: FilterKernel, eta: float = 0.0) -> np.ndarray:
    """2x2 matrix of the discrete pair filter on a single mode.

    Integrates ``w'' + eta w' + lam^2 w = 0`` with the same RK4 scheme used
    for the field and filters with ``kernel``. Column ``j`` is the image of
    the unit initial pair ``e_j``.
    """
    dt = plan.dt
    A = np.array([[0.0, 1.0], [-lam**2, -eta]])
    # RK4 amplification matrix for y' = A y.
    hA = dt * A
    R = np.eye(2) + hA + hA @ hA / 2 + hA @ hA @ hA / 6 + hA @ hA @ hA @ hA / 24
    Y = np.eye(2, dtype=np.result_type(kernel.samples, float))
    acc = kernel.samples[0] * Y
    for n in range(1, plan.n_steps + 1):
        Y = R @ Y
        acc = acc + kernel.samples[n] * Y
    return acc


# ---------------------------------------------------------------------------
# Damped filter
# ---------------------------------------------------------------------------


def _mean_exp(z: complex, T: float) -> complex:
    """``(1/T) int_0^T exp(z t) dt`` without cancellation for small ``z T``."""
    x = z * T
    if abs(x) < 1e-5:
        return 1 + x / 2 + x * x / 6 + x**3 / 24
    return np.expm1(x) / x


def damped_filter_values(alpha: float, omega: float, eta: float) -> tuple[complex, complex]:
    """Closed forms of ``(1/T) int_0^T exp((i omega - eta/2) t) (cos, sin)(alpha t) dt``.

    The eigenvalues of the damped pair filter are ``beta +- i gamma``.
    """
    T = 2.0 * math.pi / omega
    zp = 1j * omega - eta / 2 + 1j * alpha
    zm = 1j * omega - eta / 2 - 1j * alpha
    ep, em = _mean_exp(zp, T), _mean_exp(zm, T)
    return complex((ep + em) / 2), complex((ep - em) / 2j)


def damped_rate_bound(omega: float, eta: float) -> float:
    """``2 (1 - exp(-eta T / 2)) / (eta T)``, the damped iteration rate bound."""
    if not eta > 0:
        raise ParameterError("damping eta must be positive")
    x = eta * math.pi / omega  # eta T / 2
    return float(-math.expm1(-x) / x)
