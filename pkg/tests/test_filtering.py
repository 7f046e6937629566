import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from waveholtz.analysis import corrected_frequency
from waveholtz.errors import FilterSingularityError, ParameterError
from waveholtz.filtering import (
    PAIR_CONSTANTS,
    SCALAR_CONSTANTS,
    FilterKernel,
    beta_bar,
    check_filter_bounds,
    damped_filter_values,
    damped_rate_bound,
    discrete_beta,
    discrete_gamma,
    discrete_pair_transfer,
    gamma_bar,
    mu_bar_abs,
)
from waveholtz.timestepping import StepPlan


def _quad_beta(r):
    val, _ = quad(lambda t: (math.cos(t) - 0.25) * math.cos(r * t), 0, 2 * math.pi, limit=200, epsabs=1e-13)
    return val / math.pi


def _quad_gamma(r):
    val, _ = quad(lambda t: (math.cos(t) - 0.25) * math.sin(r * t), 0, 2 * math.pi, limit=200, epsabs=1e-13)
    return val / math.pi


def _quad_damped(alpha, omega, eta):
    T = 2 * math.pi / omega

    def part(fn, trig):
        return quad(lambda t: fn(np.exp((1j * omega - eta / 2) * t) * trig(alpha * t)), 0, T,
                    limit=200, epsabs=1e-13)[0] / T

    b = part(np.real, np.cos) + 1j * part(np.imag, np.cos)
    g = part(np.real, np.sin) + 1j * part(np.imag, np.sin)
    return b, g


# --- continuous transfer functions ---------------------------------------------------


def test_special_values():
    assert beta_bar(1.0) == pytest.approx(1.0, abs=1e-15)
    assert beta_bar(0.0) == pytest.approx(-0.5, abs=1e-15)
    assert gamma_bar(1.0) == 0.0
    assert gamma_bar(0.0) == 0.0
    assert mu_bar_abs(1.0) == pytest.approx(1.0, abs=1e-15)


def test_mu_half_and_three_halves():
    assert mu_bar_abs(0.5) ** 2 == pytest.approx(49 / (9 * math.pi**2), abs=1e-12)
    assert mu_bar_abs(1.5) ** 2 <= 0.44


@pytest.mark.parametrize("r", [0.0, 0.1, 0.5, 0.75, 0.99, 0.9999, 1.0, 1.00001, 1.2, 1.5, 2.0, 3.7, 10.0])
def test_beta_gamma_match_quadrature(r):
    assert beta_bar(r) == pytest.approx(_quad_beta(r), abs=1e-12)
    assert gamma_bar(r) == pytest.approx(_quad_gamma(r), abs=1e-12)


def test_gamma_half_closed_form():
    assert gamma_bar(0.5) == pytest.approx(-7 / (3 * math.pi), abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 50.0))
def test_mu_is_modulus_of_pair(r):
    assert mu_bar_abs(r) == pytest.approx(math.hypot(beta_bar(r), gamma_bar(r)), rel=1e-12, abs=1e-15)


def test_vectorized_evaluation_continuous_through_one():
    r = np.linspace(0.7, 1.3, 6001)
    b = beta_bar(r)
    assert np.max(np.abs(np.diff(b))) < 1e-3
    assert np.all(np.isfinite(b)) and np.all(np.isfinite(gamma_bar(r)))


def test_negative_ratio_rejected():
    with pytest.raises(ParameterError):
        beta_bar(-0.1)


# --- bounds ----------------------------------------------------------------------------


def test_bound_suite_dense_grid():
    rep = check_filter_bounds(np.linspace(0.0, 20.0, 20001))
    assert rep.violations == 0
    assert rep.min_slack >= -1e-12
    assert set(rep.active) <= {
        "pair_quadratic", "pair_plateau", "pair_tail",
        "scalar_nonneg", "scalar_quadratic", "scalar_plateau", "scalar_tail",
    }


def test_bound_examples():
    assert mu_bar_abs(1.1) <= 1 - 15 / 32 * 0.01
    assert mu_bar_abs(10.0) <= 3 / (2 * math.pi) / 9
    assert 3 / (2 * math.pi) / 9 == pytest.approx(0.05305, abs=1e-5)


def test_bound_report_flags_violation():
    rep = check_filter_bounds(np.array([1.0, 2.0]), tol=-1.0)
    assert rep.violations > 0


def test_constants():
    assert PAIR_CONSTANTS.b1 == pytest.approx(math.pi**2 / 6 - 0.25)
    assert PAIR_CONSTANTS.b1 == pytest.approx(1.39, abs=0.01)
    assert SCALAR_CONSTANTS.b1 == pytest.approx(6.33, abs=0.01)


@pytest.mark.parametrize("consts,fn", [(PAIR_CONSTANTS, mu_bar_abs), (SCALAR_CONSTANTS, beta_bar)])
def test_local_expansion(consts, fn):
    d = np.linspace(-0.05, 0.05, 1001)
    d = d[d != 0]
    err = np.abs(fn(1 + d) - (1 - consts.b1 * d**2))
    assert np.all(err <= consts.remainder_bound * np.abs(d) ** 3)
    # the quadratic coefficient is sharp: the remainder is genuinely cubic
    assert np.max(err / np.abs(d) ** 3) < 10


# --- discrete kernels ----------------------------------------------------------------------


def test_standard_kernel_sum():
    plan = StepPlan(2.0, 37)
    k = FilterKernel.standard(plan)
    assert k.samples.sum() == pytest.approx(-0.5, abs=1e-14)


def test_discrete_beta_at_resonance_coarse():
    plan = StepPlan(1.0, 100)
    b = discrete_beta(1.0, 1.0, plan)
    assert abs(b - 1) <= 1e-3 and b <= 1.0


def test_discrete_beta_zero_frequency():
    plan = StepPlan(1.0, 10_000)
    assert discrete_beta(0.0, 1.0, plan) == pytest.approx(-0.5, abs=1e-6)


def test_discrete_beta_converges_to_continuous():
    plan = StepPlan(1.0, 1_000_000)
    assert discrete_beta(0.83, 1.0, plan) == pytest.approx(beta_bar(0.83), abs=1e-9)


def test_discrete_transfer_oracle_on_grid():
    omega = 3.0
    plan = StepPlan(omega, 100_000)
    r = np.linspace(0.0, 10.0, 101)
    np.testing.assert_allclose(discrete_beta(r * omega, omega, plan), beta_bar(r), atol=1e-8)
    np.testing.assert_allclose(discrete_gamma(r * omega, omega, plan), gamma_bar(r), atol=1e-8)


@pytest.mark.parametrize("r", [0.3, 0.9, 1.0, 1.6, 4.0])
def test_pair_transfer_eigenvalues_approach_mu(r):
    omega = 2.0
    plan = StepPlan(omega, 4000)
    B = discrete_pair_transfer(r * omega, plan, FilterKernel.standard(plan))
    mags = np.abs(np.linalg.eigvals(B))
    np.testing.assert_allclose(mags, mu_bar_abs(r), atol=1e-5)


def test_corrected_kernel_matches_standard_times_ratio():
    plan = StepPlan(1.0, 50)
    wb = corrected_frequency(1.0, plan.dt, 1)
    k = FilterKernel.corrected(plan, wb)
    ref = FilterKernel.standard(plan).samples * np.cos(plan.times) / np.cos(wb * plan.times)
    np.testing.assert_allclose(k.samples, ref, rtol=1e-12)


def test_corrected_kernel_guard_fires():
    plan = StepPlan(1.0, 100)
    omega_bar = math.pi / (2 * plan.times[5])  # cos(omega_bar t_5) = 0, cos(t_5) is not
    with pytest.raises(FilterSingularityError):
        FilterKernel.corrected(plan, omega_bar)


@pytest.mark.parametrize("m", [2, 3])
def test_corrected_kernel_shared_zero_allowed(m):
    # with M divisible by 4 both cosines vanish at t = T/4 and 3T/4
    plan = StepPlan(1.0, 212)
    k = FilterKernel.corrected(plan, corrected_frequency(1.0, plan.dt, m))
    assert np.all(np.isfinite(k.samples))
    assert np.max(np.abs(k.samples)) <= 2 * np.max(np.abs(FilterKernel.standard(plan).samples))


# --- damped filter -------------------------------------------------------------------------


def test_damped_rate_bound_values():
    assert damped_rate_bound(10.0, 5.0) == pytest.approx(2 * (1 - math.exp(-math.pi / 2)) / math.pi)
    assert damped_rate_bound(10.0, 5.0) == pytest.approx(0.5043, abs=1e-4)
    assert damped_rate_bound(1.0, 1e6) < 1e-5
    assert damped_rate_bound(1.0, 1e-9) == pytest.approx(1.0, abs=1e-8)
    for eta in (0.0, -1.0):
        with pytest.raises(ParameterError):
            damped_rate_bound(1.0, eta)


@pytest.mark.parametrize("alpha,omega,eta", [(0.0, 2.0, 1.0), (1.0, 1.0, 0.5), (3.0, 2.0, 2.0), (7.5, 3.0, 0.1)])
def test_damped_values_match_quadrature(alpha, omega, eta):
    b, g = damped_filter_values(alpha, omega, eta)
    bq, gq = _quad_damped(alpha, omega, eta)
    assert abs(b - bq) <= 1e-12 and abs(g - gq) <= 1e-12


def test_damped_zero_frequency_has_no_quadrature_part():
    _, g = damped_filter_values(0.0, 3.0, 1.0)
    assert g == 0


def test_damped_vanishing_damping_limit():
    b, g = damped_filter_values(4.0, 4.0, 1e-8)
    assert abs(b - 1j * g - 1) <= 1e-6


@settings(max_examples=200, deadline=None)
@given(alpha=st.floats(0.0, 100.0), omega=st.floats(0.5, 50.0), ratio=st.floats(1e-3, 10.0))
def test_damped_eigenvalues_within_bound(alpha, omega, ratio):
    eta = ratio * omega
    b, g = damped_filter_values(alpha, omega, eta)
    bound = damped_rate_bound(omega, eta)
    for mu in (b + 1j * g, b - 1j * g):
        assert abs(mu) <= bound * (1 + 1e-12)
        assert abs(mu) < 1.0
