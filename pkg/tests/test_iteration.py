import math

import numpy as np
import pytest

from conftest import laplacian_1d
from waveholtz.analysis import direct_helmholtz_solve, lambda_tilde, modified_frequency
from waveholtz.discretization import (
    BoundarySpec,
    DiscreteLaplacian,
    Grid1D,
    Grid2D,
    Impedance,
    WaveSpeedField,
    build_laplacian_1d,
    build_laplacian_2d,
    dirichlet_lift_1d,
    eig_small,
)
from waveholtz.errors import MisuseError, ParameterError, ShapeError
from waveholtz.filtering import (
    FilterKernel,
    beta_bar,
    damped_rate_bound,
    discrete_beta,
    discrete_pair_transfer,
    gamma_bar,
)
from waveholtz.iteration import (
    AffineSystem,
    WaveHoltzProblem,
    apply_A,
    apply_pi,
    apply_S,
    compute_rhs,
    fixed_point_solve,
    reconstruct,
    solve,
)
from waveholtz.timestepping import StepPlan, stable_dt

OMEGA = 10.0


def _gauss(L, center=0.4, width=0.15):
    return L.sample(lambda x: np.exp(-((x - center) / width) ** 2))


def _problem(n=34, mode="simplified", f=None, cfl=1.0, **kw):
    L = laplacian_1d(n)
    plan = stable_dt(L, OMEGA, kw.get("m", 1), cfl, eta=kw.get("eta", 0.0))
    f = np.zeros(L.n) if f is None else f(L)
    return WaveHoltzProblem(L, OMEGA, f, plan, mode=mode, **kw)


# --- construction --------------------------------------------------------------------


def test_problem_validation():
    L = laplacian_1d(20)
    plan = stable_dt(L, OMEGA)
    z = np.zeros(L.n)
    with pytest.raises(ShapeError):
        WaveHoltzProblem(L, OMEGA, np.zeros(L.n + 1), plan)
    with pytest.raises(ParameterError):
        WaveHoltzProblem(L, OMEGA, z, plan, mode="bogus")
    with pytest.raises(ParameterError):
        WaveHoltzProblem(L, 2 * OMEGA, z, plan)
    with pytest.raises(MisuseError):
        WaveHoltzProblem(L, OMEGA, z, plan, eta=1.0)
    with pytest.raises(MisuseError):
        WaveHoltzProblem(L, OMEGA, z, plan, mode="general", corrected=True)
    with pytest.raises(MisuseError):
        WaveHoltzProblem(L, OMEGA, z + 1j, plan)
    with pytest.raises(ParameterError):
        WaveHoltzProblem(L, OMEGA, z, StepPlan(OMEGA, 3))


def test_simplified_rejects_impedance():
    grid = Grid1D(0.0, 1.0, 21)
    L = build_laplacian_1d(grid, WaveSpeedField.constant(grid), BoundarySpec.impedance(0.6, 0.8))
    with pytest.raises(MisuseError):
        WaveHoltzProblem(L, OMEGA, np.zeros(L.n), stable_dt(L, OMEGA, cfl_factor=0.5))


def test_impedance_mode_needs_impedance_side():
    L = laplacian_1d(21, "NN")
    with pytest.raises(MisuseError):
        WaveHoltzProblem(L, OMEGA, np.zeros(L.n), stable_dt(L, OMEGA, cfl_factor=0.5), mode="impedance")


@pytest.mark.parametrize("mode,shape,dtype", [("simplified", (32,), float), ("general", (2, 32), float),
                                             ("damped", (2, 32), complex)])
def test_iterate_layout(mode, shape, dtype):
    kw = {"eta": 5.0} if mode == "damped" else {}
    P = _problem(mode=mode, cfl=0.5, **kw)
    assert P.shape == shape and P.zeros().dtype == np.dtype(dtype)
    with pytest.raises(ShapeError):
        apply_pi(P, np.zeros(33))


# --- filter application -----------------------------------------------------------------


@pytest.mark.parametrize("mode", ["simplified", "general", "damped"])
def test_zero_maps_to_zero(mode):
    kw = {"eta": 5.0} if mode == "damped" else {}
    P = _problem(mode=mode, cfl=0.5, **kw)
    assert np.all(apply_pi(P, P.zeros()) == 0)
    assert np.all(apply_S(P, P.zeros()) == 0)


def test_simplified_modal_equivalence():
    P = _problem(n=34)
    E = eig_small(P.laplacian)
    lt = lambda_tilde(E.frequencies, P.plan.dt, 1)
    bt = discrete_beta(lt, OMEGA, P.plan)
    for j in range(P.n):
        phi = E.vectors[:, j]
        assert np.linalg.norm(apply_pi(P, phi) - bt[j] * phi) <= 1e-11 * np.linalg.norm(phi)


@pytest.mark.parametrize("m", [1, 2])
def test_simplified_operator_diagonal_in_eigenbasis(m):
    P = _problem(n=66, m=m)
    E = eig_small(P.laplacian)
    S = np.column_stack([apply_S(P, E.vectors[:, j]) for j in range(P.n)])
    coeffs = E.vectors.T @ (P.laplacian.weights[:, None] * S)
    lt = lambda_tilde(E.frequencies, P.plan.dt, m)
    np.testing.assert_allclose(coeffs, np.diag(discrete_beta(lt, OMEGA, P.plan)), atol=1e-10)


def test_general_mode_block_structure():
    L = laplacian_1d(22)
    plan = StepPlan(OMEGA, 400)
    P = WaveHoltzProblem(L, OMEGA, np.zeros(L.n), plan, mode="general")
    E = eig_small(L)
    K = FilterKernel.standard(plan)
    for j in (0, 3, 9):
        phi = E.vectors[:, j]
        lam = E.frequencies[j]
        B = np.empty((2, 2))
        for col in range(2):
            z = np.zeros((2, L.n))
            z[col] = phi
            out = apply_S(P, z)
            B[:, col] = out @ phi  # H = I for Dirichlet
        np.testing.assert_allclose(B, discrete_pair_transfer(lam, plan, K), atol=1e-11)
        r = lam / OMEGA
        template = np.array([[beta_bar(r), gamma_bar(r) / lam], [-lam * gamma_bar(r), beta_bar(r)]])
        # trapezoidal filter quadrature dominates: O((omega dt)^2)
        scaled = np.abs(B - template) / np.array([[1, 1 / lam], [lam, 1]])
        assert np.max(scaled) <= 0.1 * (OMEGA * plan.dt) ** 2


def test_affinity(rng):
    P = _problem(mode="general", f=lambda L: _gauss(L) * (1 + 0.5j), cfl=0.5)
    x, y = rng.standard_normal((2,) + P.shape)
    a, b = 0.7, -1.3
    p0 = compute_rhs(P)
    lhs = apply_pi(P, a * x + b * y) - p0
    rhs = a * (apply_pi(P, x) - p0) + b * (apply_pi(P, y) - p0)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)


def test_apply_S_requires_homogeneous_problem():
    P = _problem(f=_gauss)
    with pytest.raises(MisuseError):
        apply_S(P, P.zeros())
    z = np.ones(P.n)
    np.testing.assert_allclose(apply_S(P.homogeneous(), z), apply_pi(P, z) - compute_rhs(P), atol=1e-13)


# --- right-hand side and A -------------------------------------------------------------------


def test_rhs_properties():
    P = _problem(f=_gauss)
    assert np.all(compute_rhs(P.homogeneous()) == 0)
    b = compute_rhs(P)
    b2 = compute_rhs(P.with_forcing(2 * P.forcing))
    assert np.linalg.norm(b2 - 2 * b) <= 1e-13 * np.linalg.norm(b2)
    x, log = fixed_point_solve(P, max_iter=1)
    assert np.array_equal(x, b)


def test_apply_A_zero_and_symmetry(rng):
    P = _problem(f=_gauss)
    b = compute_rhs(P)
    assert np.all(apply_A(P, P.zeros(), b) == 0)
    u, w = rng.standard_normal((2, P.n))
    Au, Aw = apply_A(P, u, b), apply_A(P, w, b)
    assert abs(P.laplacian.inner(Au, w) - P.laplacian.inner(u, Aw)) <= 1e-10 * np.linalg.norm(Au) * np.linalg.norm(w)


def test_apply_A_symmetry_neumann_weighted(rng):
    L = laplacian_1d(30, "NN")
    plan = stable_dt(L, OMEGA)
    P = WaveHoltzProblem(L, OMEGA, np.zeros(L.n), plan)
    u, w = rng.standard_normal((2, P.n))
    Au, Aw = apply_A(P, u), apply_A(P, w)
    assert abs(L.inner(Au, w) - L.inner(u, Aw)) <= 1e-10 * np.linalg.norm(Au) * np.linalg.norm(w)


# --- corrected scheme ------------------------------------------------------------------------------


@pytest.mark.parametrize("m", [1, 2])
def test_corrected_fixed_point_is_discrete_helmholtz_solution(m):
    P = _problem(f=_gauss, m=m, corrected=True)
    u = direct_helmholtz_solve(P.laplacian, OMEGA, P.forcing).real
    assert np.linalg.norm(apply_pi(P, u) - u) <= 1e-11 * np.linalg.norm(u)
    b = compute_rhs(P)
    assert np.linalg.norm(apply_A(P, u, b) - b) <= 1e-11 * np.linalg.norm(u)


# --- fixed-point iteration ---------------------------------------------------------------------------


def test_fixed_point_zero_forcing_one_iteration():
    P = _problem()
    x, log = fixed_point_solve(P, tol=1e-12)
    assert log.converged and log.iterations == 1 and np.all(x == 0)


def test_fixed_point_constant_solution_matches_modified_frequency():
    L = laplacian_1d(21)
    plan = stable_dt(L, OMEGA)
    f = np.full(L.n, OMEGA**2) - dirichlet_lift_1d(L, 1.0, 1.0)
    P = WaveHoltzProblem(L, OMEGA, f, plan)
    x, log = fixed_point_solve(P, tol=1e-13, max_iter=3000)
    assert log.converged
    ud = direct_helmholtz_solve(L, modified_frequency(OMEGA, plan.dt), f).real
    assert np.linalg.norm(x - ud) <= 1e-10 * np.linalg.norm(f)


def test_fixed_point_non_convergence_is_reported():
    L = DiscreteLaplacian.from_matrix([[OMEGA**2]])
    plan = StepPlan(OMEGA, 100)
    P = WaveHoltzProblem(L, OMEGA, np.ones(1), plan)
    x, log = fixed_point_solve(P, tol=1e-12, max_iter=20)
    assert not log.converged and log.iterations == 20


@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0])
def test_damped_rate_below_bound(ratio):
    eta = ratio * OMEGA
    P = _problem(n=34, mode="damped", f=lambda L: _gauss(L).astype(complex), cfl=0.5, eta=eta)
    x, log = fixed_point_solve(P, tol=1e-12, max_iter=300)
    assert log.converged
    assert log.rate <= damped_rate_bound(OMEGA, eta) + 0.05
    ud = direct_helmholtz_solve(P.laplacian, OMEGA, P.forcing, eta)
    # remaining differences are RK4 time errors
    assert np.linalg.norm(reconstruct(P, x) - ud) <= 1e-4 * np.linalg.norm(ud)
    # the velocity component of the fixed point is -i omega u
    assert np.linalg.norm(x[1] + 1j * OMEGA * x[0]) <= 1e-4 * np.linalg.norm(x[1])


# --- solvers -------------------------------------------------------------------------------------------


def test_cg_matches_fixed_point():
    P = _problem(n=34, f=_gauss)
    xf, _ = fixed_point_solve(P, tol=1e-14, max_iter=5000)
    res = solve(P, "cg", tol=1e-13)
    assert res.converged
    assert np.linalg.norm(res.x - xf) <= 1e-9 * np.linalg.norm(xf)
    assert np.all(res.report.ritz_values > 0) and np.all(res.report.ritz_values < 1.55)


@pytest.mark.parametrize("mode", ["general", "damped"])
def test_gmres_reconstruction_solves_helmholtz(mode):
    eta = OMEGA / 2 if mode == "damped" else 0.0
    kw = {"eta": eta} if mode == "damped" else {}
    P = _problem(n=66, mode=mode, f=lambda L: _gauss(L) * (1 - 0.7j), cfl=0.5, **kw)
    res = solve(P, "gmres", tol=1e-12)
    assert res.converged
    assert all(b <= a for a, b in zip(res.residuals, res.residuals[1:]))
    ud = direct_helmholtz_solve(P.laplacian, OMEGA, P.forcing, eta)
    assert np.linalg.norm(res.u - ud) <= 1e-4 * np.linalg.norm(ud)


@pytest.mark.parametrize("mode", ["general", "damped"])
def test_gmres_solution_time_error_is_fourth_order(mode):
    from waveholtz.analysis import fit_order

    eta = OMEGA / 2 if mode == "damped" else 0.0
    L = laplacian_1d(34)
    f = _gauss(L) * (1 - 0.7j)
    ud = direct_helmholtz_solve(L, OMEGA, f, eta)
    base = stable_dt(L, OMEGA, 1, 0.5, eta=eta).n_steps
    dts, errs = [], []
    for k in range(3):
        plan = StepPlan(OMEGA, base * 2**k)
        P = WaveHoltzProblem(L, OMEGA, f, plan, mode=mode, eta=eta)
        res = solve(P, "gmres", tol=1e-13)
        dts.append(plan.dt)
        errs.append(np.linalg.norm(res.u - ud) / np.linalg.norm(ud))
    assert abs(fit_order(dts, errs).slope - 4) <= 0.3


def test_solve_argument_checks():
    P = _problem(mode="general", f=_gauss, cfl=0.5)
    with pytest.raises(MisuseError):
        solve(P, "cg")
    with pytest.raises(ParameterError):
        solve(P, "bicgstab")


def test_affine_system_flattening():
    P = _problem(mode="general", f=_gauss, cfl=0.5)
    sys_ = AffineSystem(P)
    assert sys_.rhs.shape == (2 * P.n,)
    z = np.zeros(2 * P.n)
    assert np.all(sys_.matvec(z) == 0)


def test_impedance_mode_runs_and_matches_direct_route():
    grid = Grid1D(0.0, 1.0, 201)
    imp = Impedance.from_ratio(1.0)
    L = build_laplacian_1d(grid, WaveSpeedField.constant(grid), BoundarySpec((imp, imp)))
    omega = 4 * math.pi
    plan = StepPlan(omega, 400)
    f = L.sample(lambda x: np.exp(-60 * (x - 0.5) ** 2)) * 10
    Pd = WaveHoltzProblem(L, omega, f, plan, mode="general")
    Pe = WaveHoltzProblem(L, omega, f, plan, mode="impedance")
    z = np.stack([np.sin(3 * grid.x), np.cos(2 * grid.x)])
    d, e = apply_pi(Pd, z), apply_pi(Pe, z)
    # the routes differ by O((omega h)^2) spatial error
    assert np.linalg.norm(d - e) <= 1e-2 * np.linalg.norm(e)


def test_two_dimensional_damped_neumann_solve():
    grid = Grid2D.square(-1.0, 1.0, 21)
    L = build_laplacian_2d(grid, WaveSpeedField.constant(grid), BoundarySpec.neumann(2))
    omega = 5.0
    eta = omega / 2
    plan = stable_dt(L, omega, 1, 0.5, eta=eta)
    f = L.sample(lambda x, y: np.exp(-20 * (x**2 + y**2))).astype(complex)
    P = WaveHoltzProblem(L, omega, f, plan, mode="damped", eta=eta)
    res = solve(P, "gmres", tol=1e-10)
    assert res.converged
    ud = direct_helmholtz_solve(L, omega, f, eta)
    assert np.linalg.norm(res.u - ud) <= 1e-4 * np.linalg.norm(ud)
