"""Helmholtz solvers built on time-periodic wave equation filtering."""

from .analysis import (
    corrected_frequency,
    direct_helmholtz_solve,
    lambda_tilde,
    modified_frequency,
)
from .discretization import (
    BoundarySpec,
    Dirichlet,
    Grid1D,
    Grid2D,
    Impedance,
    Neumann,
    WaveSpeedField,
    build_laplacian_1d,
    build_laplacian_2d,
    eig_small,
)
from .iteration import (
    WaveHoltzProblem,
    apply_A,
    apply_pi,
    apply_S,
    compute_rhs,
    fixed_point_solve,
    reconstruct,
    solve,
)
from .timestepping import StepPlan, plan_for_cfl, stable_dt

__version__ = "0.1.0"
