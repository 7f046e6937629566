"""Matrix-free conjugate gradients and GMRES.

Both solvers take a callable ``matvec`` and a right-hand side. They return
the solution and a :class:`SolveReport` with the relative residual history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .errors import BreakdownError, IndefiniteOperatorError, ParameterError

__all__ = ["SolveReport", "cg", "gmres"]

MatVec = Callable[[np.ndarray], np.ndarray]


@dataclass
class SolveReport:
    """Outcome of a Krylov solve.

    ``residuals[k]`` is the relative residual after ``k`` iterations, with
    ``residuals[0] = 1`` for a zero initial guess. ``achieved_residual`` is
    the true relative residual ``||b - A x|| / ||b||`` of the returned
    solution. ``ritz_values`` holds CG's Lanczos eigenvalue estimates.
    """

    iterations: int
    residuals: list
    converged: bool
    achieved_residual: float
    ritz_values: np.ndarray = field(default_factory=lambda: np.empty(0))


def _check_spd(matvec: MatVec, n: int, inner, n_pairs: int, rng) -> None:
    for _ in range(n_pairs):
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        Au, Av = matvec(u), matvec(v)
        scale = np.sqrt(inner(Au, Au) * inner(v, v)) + np.sqrt(inner(u, u) * inner(Av, Av))
        if abs(inner(Au, v) - inner(u, Av)) > 1e-8 * scale:
            raise IndefiniteOperatorError("operator is not symmetric in the given inner product")
        if inner(Au, u) <= 0:
            raise IndefiniteOperatorError("operator is not positive definite")


def cg(
    matvec: MatVec,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 500,
    x0: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
    check_spd: bool = True,
    seed: int = 0,
):
    """Conjugate gradients for a real operator that is SPD in ``<u, v> = sum(weights u v)``.

    Stops when ``||r|| <= tol ||b||``. Raises :class:`IndefiniteOperatorError`
    if a symmetry or positivity probe fails or if ``p . A p <= 0`` occurs.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    wts = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    def inner(u, v):
        return float(np.dot(u, wts * v))

    if check_spd:
        _check_spd(matvec, n, inner, 5, np.random.default_rng(seed))

    bnorm = np.sqrt(inner(b, b))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, [0.0], True, 0.0)
    r = b - matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = inner(r, r)
    history = [np.sqrt(rr) / bnorm]
    alphas, betas = [], []
    converged = history[-1] <= tol
    it = 0
    while not converged and it < max_iter:
        Ap = matvec(p)
        pAp = inner(p, Ap)
        if pAp <= 0:
            raise IndefiniteOperatorError(f"p . A p = {pAp:.3e} at iteration {it}")
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = inner(r, r)
        beta = rr_new / rr
        alphas.append(alpha)
        betas.append(beta)
        rr = rr_new
        p = r + beta * p
        it += 1
        history.append(np.sqrt(rr) / bnorm)
        converged = history[-1] <= tol

    ritz = _lanczos_ritz(alphas, betas)
    true_res = float(np.sqrt(inner(b - matvec(x), b - matvec(x))) / bnorm)
    return x, SolveReport(it, history, converged, true_res, ritz)


def _lanczos_ritz(alphas, betas) -> np.ndarray:
    """Eigenvalues of the Lanczos tridiagonal matrix implied by CG coefficients."""
    k = len(alphas)
    if k == 0:
        return np.empty(0)
    a = np.asarray(alphas)
    bt = np.asarray(betas)
    d = 1.0 / a
    d[1:] += bt[:-1] / a[:-1]
    e = np.sqrt(bt[:-1]) / a[:-1]
    if k == 1:
        return d
    return sla.eigvalsh_tridiagonal(d, e)


def gmres(
    matvec: MatVec,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 500,
    x0: Optional[np.ndarray] = None,
    breakdown_tol: float = 1e-14,
):
    """Full GMRES without restarts.

    Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass and
    the least-squares problem is updated with Givens rotations. A vanishing
    subdiagonal entry ends the iteration; if the residual is still above
    ``tol`` at that point a :class:`BreakdownError` is raised.
    """
    b = np.asarray(b)
    dtype = np.result_type(b, float)
    n = b.size
    if max_iter < 1:
        raise ParameterError("max_iter must be positive")
    x = np.zeros(n, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n, dtype=dtype), SolveReport(0, [0.0], True, 0.0)
    r0 = b - matvec(x) if x0 is not None else b.astype(dtype)
    beta = np.linalg.norm(r0)
    history = [beta / bnorm]
    if history[0] <= tol:
        return x, SolveReport(0, history, True, history[0])

    k_max = min(max_iter, n)
    V = np.zeros((k_max + 1, n), dtype=dtype)
    Hm = np.zeros((k_max + 1, k_max), dtype=dtype)
    cs = np.zeros(k_max, dtype=dtype)
    sn = np.zeros(k_max, dtype=dtype)
    g = np.zeros(k_max + 1, dtype=dtype)
    g[0] = beta
    V[0] = r0 / beta
    k = 0
    converged = False
    while k < k_max:
        w = np.asarray(matvec(V[k]), dtype=dtype)
        wnorm0 = np.linalg.norm(w)
        for _ in range(2):  # MGS plus one reorthogonalization pass
            for j in range(k + 1):
                hij = np.vdot(V[j], w)
                Hm[j, k] += hij
                w = w - hij * V[j]
        hnext = np.linalg.norm(w)
        Hm[k + 1, k] = hnext
        for j in range(k):  # previous rotations
            t = np.conj(cs[j]) * Hm[j, k] + np.conj(sn[j]) * Hm[j + 1, k]
            Hm[j + 1, k] = -sn[j] * Hm[j, k] + cs[j] * Hm[j + 1, k]
            Hm[j, k] = t
        h1, h2 = Hm[k, k], Hm[k + 1, k]
        rho = np.sqrt(abs(h1) ** 2 + abs(h2) ** 2)
        if rho == 0.0 or rho <= breakdown_tol * wnorm0:
            raise BreakdownError(
                f"operator is singular on the Krylov space at iteration {k + 1} "
                f"with residual {abs(g[k]) / bnorm:.3e}"
            )
        cs[k], sn[k] = h1 / rho, h2 / rho
        Hm[k, k] = rho
        Hm[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = np.conj(cs[k]) * g[k]
        k += 1
        res = abs(g[k]) / bnorm
        history.append(res)
        if res <= tol:
            converged = True
            break
        if hnext <= breakdown_tol * wnorm0:
            raise BreakdownError(f"Arnoldi breakdown at iteration {k} with residual {res:.3e}")
        V[k] = w / hnext

    y = sla.solve_triangular(Hm[:k, :k], g[:k])
    x = x + V[:k].T @ y
    true_res = float(np.linalg.norm(b - matvec(x)) / bnorm)
    return x, SolveReport(k, history, converged, true_res)
