"""Grids, wave speed fields and second-order finite difference Laplacians.

The spatial operator is stored in factored form ``L = H^{-1} K``:

* ``K`` (``stiffness``) is a symmetric positive semi-definite sparse matrix
  built from conservative edge fluxes ``c^2_{edge} (w_a - w_b)^2 / h^2``.
* ``H`` (``weights``) is the diagonal trapezoidal quadrature weight of each
  degree of freedom: 1 in the interior, 1/2 on a Neumann edge, 1/4 in a
  Neumann corner.

With Dirichlet boundaries the boundary nodes are eliminated and ``H = I``.
With Neumann boundaries ``L`` reproduces the mirrored ghost-node stencil and
is self-adjoint in the weighted inner product ``<u, v>_H = sum(H u v)``,
which is the inner product used everywhere in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (
    BoundaryError,
    ExtensionError,
    InvalidFieldError,
    InvalidGridError,
    OperatorError,
    ShapeError,
    SizeError,
)

__all__ = [
    "Grid1D",
    "Grid2D",
    "WaveSpeedField",
    "Dirichlet",
    "Neumann",
    "Impedance",
    "BoundarySpec",
    "DiscreteLaplacian",
    "Eigenpairs",
    "ExtendedProblem",
    "build_laplacian_1d",
    "build_laplacian_2d",
    "eig_small",
    "extend_problem",
    "restrict",
    "dirichlet_lift_1d",
]


# ---------------------------------------------------------------------------
# Grids and coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid1D:
    """Uniform node-centred grid on ``[a, b]`` including both endpoints."""

    a: float
    b: float
    n_nodes: int

    def __post_init__(self):
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise InvalidGridError(f"need at least 3 nodes, got {self.n_nodes}")
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise InvalidGridError(f"degenerate interval [{self.a}, {self.b}]")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n_nodes - 1)

    @property
    def x(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n_nodes)

    @classmethod
    def from_spacing(cls, a: float, b: float, h: float) -> "Grid1D":
        """Grid on ``[a, b]`` with spacing as close as possible to ``h``."""
        n_cells = max(2, int(round((b - a) / h)))
        return cls(a, b, n_cells + 1)


@dataclass(frozen=True)
class Grid2D:
    """Tensor product of two :class:`Grid1D`; arrays use ``indexing='ij'``."""

    gx: Grid1D
    gy: Grid1D

    @classmethod
    def square(cls, a: float, b: float, n_nodes: int) -> "Grid2D":
        g = Grid1D(a, b, n_nodes)
        return cls(g, g)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.gx.n_nodes, self.gy.n_nodes)

    @property
    def hx(self) -> float:
        return self.gx.h

    @property
    def hy(self) -> float:
        return self.gy.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.gx.x, self.gy.x, indexing="ij")


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True, eq=False)
class WaveSpeedField:
    """Nodal samples of the wave speed ``c > 0`` and optional edge samples.

    Edge values default to arithmetic means of the two adjacent nodes,
    ``c_{i+1/2} = (c_i + c_{i+1}) / 2``. In 1D they can be given explicitly,
    which places a jump in ``c`` exactly at a node.
    """

    nodal: np.ndarray
    edges: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.nodal, dtype=float)
        if c.ndim not in (1, 2):
            raise InvalidFieldError("wave speed must be a 1D or 2D array")
        if not np.all(np.isfinite(c)) or np.any(c <= 0.0):
            raise InvalidFieldError("wave speed must be finite and positive")
        object.__setattr__(self, "nodal", c)
        if self.edges is not None:
            e = np.asarray(self.edges, dtype=float)
            if c.ndim != 1 or e.shape != (c.size - 1,):
                raise InvalidFieldError("explicit edge speeds need a 1D field with n - 1 values")
            if not np.all(np.isfinite(e)) or np.any(e <= 0.0):
                raise InvalidFieldError("wave speed must be finite and positive")
            object.__setattr__(self, "edges", e)

    @classmethod
    def constant(cls, grid: Grid, value: float = 1.0) -> "WaveSpeedField":
        shape = (grid.n_nodes,) if isinstance(grid, Grid1D) else grid.shape
        return cls(np.full(shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "WaveSpeedField":
        if isinstance(grid, Grid1D):
            return cls(np.broadcast_to(fn(grid.x), (grid.n_nodes,)).copy())
        X, Y = grid.mesh()
        return cls(np.broadcast_to(fn(X, Y), grid.shape).copy())

    def midpoints(self, axis: int = 0) -> np.ndarray:
        if self.edges is not None:
            return self.edges
        c = self.nodal
        lo = [slice(None)] * c.ndim
        hi = [slice(None)] * c.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        return 0.5 * (c[tuple(lo)] + c[tuple(hi)])

    @property
    def max(self) -> float:
        return float(self.nodal.max())


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dirichlet:
    kind = "dirichlet"


@dataclass(frozen=True)
class Neumann:
    kind = "neumann"


@dataclass(frozen=True)
class Impedance:
    """``alpha w_t + beta c dw/dn = 0`` with ``alpha^2 + beta^2 = 1``."""

    alpha: float
    beta: float
    kind = "impedance"

    def __post_init__(self):
        if abs(self.alpha**2 + self.beta**2 - 1.0) > 1e-12:
            raise BoundaryError("impedance coefficients need alpha^2 + beta^2 = 1")
        if self.alpha == 0.0 or self.beta == 0.0:
            raise BoundaryError("impedance coefficients must both be nonzero")

    @classmethod
    def from_ratio(cls, ratio: float) -> "Impedance":
        """Normalized coefficients with ``alpha / beta = ratio``."""
        s = math.hypot(ratio, 1.0)
        return cls(ratio / s, 1.0 / s)

    @property
    def ratio(self) -> float:
        return self.alpha / self.beta


Side = Union[Dirichlet, Neumann, Impedance]

_SIDE_CODES = {"D": Dirichlet, "N": Neumann}


@dataclass(frozen=True)
class BoundarySpec:
    """One condition per side.

    1D order is ``(left, right)``; 2D order is ``(x_lo, x_hi, y_lo, y_hi)``.
    """

    sides: tuple

    def __post_init__(self):
        if len(self.sides) not in (2, 4):
            raise BoundaryError("need 2 sides in 1D or 4 sides in 2D")
        for s in self.sides:
            if not isinstance(s, (Dirichlet, Neumann, Impedance)):
                raise BoundaryError(f"unknown boundary condition {s!r}")

    @property
    def dim(self) -> int:
        return len(self.sides) // 2

    @classmethod
    def dirichlet(cls, dim: int = 1) -> "BoundarySpec":
        return cls(tuple(Dirichlet() for _ in range(2 * dim)))

    @classmethod
    def neumann(cls, dim: int = 1) -> "BoundarySpec":
        return cls(tuple(Neumann() for _ in range(2 * dim)))

    @classmethod
    def impedance(cls, alpha: float, beta: float) -> "BoundarySpec":
        return cls((Impedance(alpha, beta), Impedance(alpha, beta)))

    @classmethod
    def from_code(cls, code: str, impedance: Optional[Impedance] = None) -> "BoundarySpec":
        """Parse strings such as ``"DN"`` or ``"II"`` (``I`` = impedance)."""
        sides = []
        for ch in code.upper():
            if ch == "I":
                sides.append(impedance or Impedance.from_ratio(1.0))
            elif ch in _SIDE_CODES:
                sides.append(_SIDE_CODES[ch]())
            else:
                raise BoundaryError(f"unknown boundary code {ch!r} in {code!r}")
        return cls(tuple(sides))

    @property
    def code(self) -> str:
        return "".join(s.kind[0].upper() for s in self.sides)

    @property
    def has_impedance(self) -> bool:
        return any(isinstance(s, Impedance) for s in self.sides)


# ---------------------------------------------------------------------------
# Discrete operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteLaplacian:
    """Discrete ``-div(c^2 grad)`` restricted to the free degrees of freedom.

    ``damping`` is nonzero only on impedance boundary nodes. It holds the
    coefficient of ``w_t`` that the boundary closure adds to ``L w`` in the
    first-order wave system. It does not enter :meth:`matvec`.
    """

    stiffness: sp.csr_matrix
    weights: np.ndarray
    bc: Optional[BoundarySpec] = None
    grid: Optional[Grid] = None
    speed: Optional[WaveSpeedField] = None
    free: Optional[np.ndarray] = None
    damping: Optional[np.ndarray] = None
    matrix: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        K = sp.csr_matrix(self.stiffness, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if K.shape != (w.size, w.size):
            raise ShapeError("stiffness and weights sizes differ")
        object.__setattr__(self, "stiffness", K)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "matrix", sp.diags(1.0 / w) @ K)
        if self.damping is None:
            object.__setattr__(self, "damping", np.zeros(w.size))
        if self.free is None:
            object.__setattr__(self, "free", np.arange(w.size))

    @classmethod
    def from_matrix(cls, K, weights: Optional[np.ndarray] = None) -> "DiscreteLaplacian":
        """Wrap an explicit symmetric matrix, e.g. a single-mode model."""
        K = sp.csr_matrix(np.atleast_2d(K) if not sp.issparse(K) else K)
        w = np.ones(K.shape[0]) if weights is None else np.asarray(weights, float)
        return cls(K, w)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return 2 if isinstance(self.grid, Grid2D) else 1

    @property
    def has_damping(self) -> bool:
        return bool(np.any(self.damping))

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def __matmul__(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Weighted inner product ``sum(H conj(u) v)``."""
        return np.vdot(u, self.weights * v)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(abs(self.inner(u, u))))

    def gershgorin_bound(self) -> float:
        """Upper bound on the largest eigenvalue ``lambda_N^2``."""
        return float(np.max(np.asarray(abs(self.matrix).sum(axis=1)).ravel()))

    def nodes(self) -> np.ndarray:
        """Coordinates of the degrees of freedom, shape ``(n,)`` or ``(n, 2)``."""
        if isinstance(self.grid, Grid1D):
            return self.grid.x[self.free]
        if isinstance(self.grid, Grid2D):
            X, Y = self.grid.mesh()
            return np.column_stack([X.ravel()[self.free], Y.ravel()[self.free]])
        return np.arange(self.n, dtype=float)

    def sample(self, fn: Callable) -> np.ndarray:
        """Evaluate ``fn`` at the degrees of freedom."""
        pts = self.nodes()
        if pts.ndim == 1:
            return np.asarray(fn(pts))
        return np.asarray(fn(pts[:, 0], pts[:, 1]))

    def to_full(self, u: np.ndarray) -> np.ndarray:
        """Scatter DoF values onto every grid node, zero on Dirichlet nodes."""
        if self.grid is None:
            return np.array(u)
        size = self.grid.n_nodes if isinstance(self.grid, Grid1D) else math.prod(self.grid.shape)
        out = np.zeros(u.shape[:-1] + (size,), dtype=np.result_type(u, float))
        out[..., self.free] = u
        return out

    def from_full(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u)[..., self.free]


def _axis_weights(n: int, lo: Side, hi: Side) -> np.ndarray:
    w = np.ones(n)
    if not isinstance(lo, Dirichlet):
        w[0] = 0.5
    if not isinstance(hi, Dirichlet):
        w[-1] = 0.5
    return w


def _free_mask(n: int, lo: Side, hi: Side) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[0] = not isinstance(lo, Dirichlet)
    mask[-1] = not isinstance(hi, Dirichlet)
    return mask


def _edge_stiffness(n_total: int, a: np.ndarray, b: np.ndarray, coef: np.ndarray) -> sp.csr_matrix:
    """Sum of ``coef_e (e_a - e_b)(e_a - e_b)^T`` over edges."""
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate([coef, coef, -coef, -coef])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_total, n_total))


def _check_speed_shape(c: WaveSpeedField, shape: tuple) -> None:
    if c.nodal.shape != shape:
        raise InvalidFieldError(f"wave speed shape {c.nodal.shape} does not match grid {shape}")


def build_laplacian_1d(grid: Grid1D, c: WaveSpeedField, bc: BoundarySpec) -> DiscreteLaplacian:
    """Second-order conservative discretization of ``-(c^2 w_x)_x`` on ``grid``.

    Interior rows read
    ``(L w)_i = -(c^2_{i+1/2}(w_{i+1}-w_i) - c^2_{i-1/2}(w_i-w_{i-1})) / h^2``.
    Dirichlet nodes are removed. Neumann nodes use the mirrored ghost value
    ``w_{-1} = w_1``. An impedance side uses the same Neumann row, and the
    ghost-node closure ``w_x = +-(alpha / (beta c)) w_t`` contributes the
    boundary damping ``2 c alpha / (beta h)`` stored in ``damping``.
    """
    if not isinstance(grid, Grid1D):
        raise InvalidGridError("build_laplacian_1d needs a Grid1D")
    if bc.dim != 1:
        raise BoundaryError("1D operator needs exactly two boundary sides")
    n, h = grid.n_nodes, grid.h
    _check_speed_shape(c, (n,))
    left, right = bc.sides
    c2 = c.midpoints() ** 2
    idx = np.arange(n - 1)
    K_full = _edge_stiffness(n, idx, idx + 1, c2 / h**2)
    H_full = _axis_weights(n, left, right)
    mask = _free_mask(n, left, right)
    free = np.flatnonzero(mask)

    damping_full = np.zeros(n)
    for node, side in ((0, left), (n - 1, right)):
        if isinstance(side, Impedance):
            damping_full[node] = 2.0 * c.nodal[node] * side.alpha / (side.beta * h)

    K = K_full[free][:, free]
    return DiscreteLaplacian(
        K, H_full[free], bc=bc, grid=grid, speed=c, free=free, damping=damping_full[free]
    )


def build_laplacian_2d(grid: Grid2D, c: WaveSpeedField, bc: BoundarySpec) -> DiscreteLaplacian:
    """Five-point conservative ``-div(c^2 grad)`` with edge-midpoint ``c^2``.

    Sides may be Dirichlet or Neumann.
    """
    if not isinstance(grid, Grid2D):
        raise InvalidGridError("build_laplacian_2d needs a Grid2D")
    if bc.dim != 2:
        raise BoundaryError("2D operator needs four boundary sides")
    if bc.has_impedance:
        raise BoundaryError("impedance sides are only supported in 1D")
    nx, ny = grid.shape
    _check_speed_shape(c, (nx, ny))
    xlo, xhi, ylo, yhi = bc.sides
    wx = _axis_weights(nx, xlo, xhi)
    wy = _axis_weights(ny, ylo, yhi)
    num = np.arange(nx * ny).reshape(nx, ny)

    cx2 = c.midpoints(axis=0) ** 2  # (nx-1, ny)
    cy2 = c.midpoints(axis=1) ** 2  # (nx, ny-1)
    ax, bx = num[:-1, :].ravel(), num[1:, :].ravel()
    ay, by = num[:, :-1].ravel(), num[:, 1:].ravel()
    coef_x = (cx2 * wy[None, :]).ravel() / grid.hx**2
    coef_y = (cy2 * wx[:, None]).ravel() / grid.hy**2
    K_full = _edge_stiffness(
        nx * ny, np.concatenate([ax, ay]), np.concatenate([bx, by]), np.concatenate([coef_x, coef_y])
    )
    H_full = np.outer(wx, wy).ravel()
    mask = np.outer(_free_mask(nx, xlo, xhi), _free_mask(ny, ylo, yhi)).ravel()
    free = np.flatnonzero(mask)
    K = K_full[free][:, free]
    return DiscreteLaplacian(K, H_full[free], bc=bc, grid=grid, speed=c, free=free)


def dirichlet_lift_1d(
    L: DiscreteLaplacian, left: float = 0.0, right: float = 0.0
) -> np.ndarray:
    """Boundary contribution of prescribed Dirichlet values.

    Returns ``r`` with ``(L_full u)|_free = L u_free - r`` whenever ``u``
    takes the values ``left`` and ``right`` on the boundary nodes. A Helmholtz
    problem ``-L_full u + omega^2 u = f`` therefore becomes
    ``-L u + omega^2 u = f - r`` on the free nodes.
    """
    grid, c = L.grid, L.speed
    if not isinstance(grid, Grid1D) or c is None:
        raise BoundaryError("lift needs an operator built on a Grid1D")
    lo, hi = L.bc.sides
    r = np.zeros(L.n)
    c2 = c.midpoints() ** 2
    if left != 0.0:
        if not isinstance(lo, Dirichlet):
            raise BoundaryError("left side is not Dirichlet")
        r[0] += c2[0] * left / grid.h**2
    if right != 0.0:
        if not isinstance(hi, Dirichlet):
            raise BoundaryError("right side is not Dirichlet")
        r[-1] += c2[-1] * right / grid.h**2
    return r


# ---------------------------------------------------------------------------
# Dense eigen-decomposition
# ---------------------------------------------------------------------------


class Eigenpairs(NamedTuple):
    """``values`` are ``lambda_j^2`` ascending; ``vectors[:, j]`` are H-orthonormal."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(np.clip(self.values, 0.0, None))


def eig_small(L: DiscreteLaplacian, max_dofs: int = 1024) -> Eigenpairs:
    """Full symmetric eigen-decomposition of ``L`` for small problems."""
    if L.n > max_dofs:
        raise SizeError(f"{L.n} degrees of freedom exceed max_dofs={max_dofs}")
    s = 1.0 / np.sqrt(L.weights)
    S = sp.diags(s) @ L.stiffness @ sp.diags(s)
    scale = abs(S).max() if S.nnz else 0.0
    if S.nnz and abs(S - S.T).max() > 1e-12 * scale:
        raise OperatorError("operator is not symmetric in the weighted inner product")
    if L.n > 1 and sp.triu(S, 2).nnz == 0:
        d = S.diagonal()
        e = S.diagonal(1)
        vals, vecs = sla.eigh_tridiagonal(d, e)
    else:
        vals, vecs = sla.eigh(S.toarray())
    return Eigenpairs(vals, s[:, None] * vecs)


# ---------------------------------------------------------------------------
# Extension of impedance problems to Neumann problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtendedProblem:
    """Neumann problem on an enlarged interval equivalent to an impedance one.

    ``offset`` is the index of the original left endpoint in the extended
    grid; the original nodes occupy ``offset : offset + n_inner``.
    """

    grid: Grid1D
    speed: WaveSpeedField
    laplacian: DiscreteLaplacian
    offset: int
    n_inner: int
    v0: np.ndarray
    v1: np.ndarray
    f: np.ndarray

    @property
    def inner(self) -> slice:
        return slice(self.offset, self.offset + self.n_inner)

    def extend(self, v0: np.ndarray, v1: Optional[np.ndarray] = None, f: Optional[np.ndarray] = None):
        """Extend data: constant for ``v0``, zero for ``v1`` and ``f``."""
        out = []
        for z, constant in ((v0, True), (v1, False), (f, False)):
            if z is None:
                out.append(None)
                continue
            z = np.asarray(z)
            if z.shape[-1] != self.n_inner:
                raise ShapeError(f"expected {self.n_inner} values, got {z.shape[-1]}")
            big = np.zeros(z.shape[:-1] + (self.grid.n_nodes,), dtype=z.dtype)
            big[..., self.inner] = z
            if constant:
                big[..., : self.offset] = z[..., :1]
                big[..., self.offset + self.n_inner :] = z[..., -1:]
            out.append(big)
        return tuple(out)


def extend_problem(
    grid: Grid1D,
    c: WaveSpeedField,
    bc: BoundarySpec,
    v0: np.ndarray,
    v1: np.ndarray,
    f: np.ndarray,
    T: float,
    margin: Optional[float] = None,
) -> ExtendedProblem:
    """Replace impedance sides by a layer of speed ``(alpha/beta) c`` and a Neumann wall.

    Each impedance side is widened by at least ``max(1, alpha/beta) c T / 2``
    so that a wave entering the layer cannot return within one period, plus
    ``margin`` (default ``2 h``). Non-impedance sides are left unchanged.
    """
    if bc.dim != 1 or not bc.has_impedance:
        raise ExtensionError("extension needs a 1D problem with an impedance side")
    if any(isinstance(s, Dirichlet) for s in bc.sides):
        raise ExtensionError("extension supports impedance and Neumann sides only")
    n, h = grid.n_nodes, grid.h
    _check_speed_shape(c, (n,))
    margin = 2.0 * h if margin is None else float(margin)
    cn = c.nodal
    n_ext = []
    speeds = []
    for side, end in zip(bc.sides, (cn[:3], cn[-3:])):
        if not isinstance(side, Impedance):
            n_ext.append(0)
            speeds.append(None)
            continue
        if side.beta == 0.0:
            raise ExtensionError("beta = 0 has no extension")
        if np.max(np.abs(end - end[0])) > 1e-12 * abs(end[0]):
            raise ExtensionError("wave speed must be constant over the last 3 nodes")
        ratio = side.alpha / side.beta
        if ratio <= 0.0:
            raise ExtensionError("extension needs alpha / beta > 0")
        width = max(1.0, ratio) * end[0] * T / 2.0
        n_ext.append(int(math.floor(width / h)) + 1 + int(math.ceil(margin / h - 1e-9)))
        speeds.append(ratio * end[0])

    nl, nr = n_ext
    big = Grid1D(grid.a - nl * h, grid.b + nr * h, n + nl + nr)
    # The layer starts exactly at the original endpoint, so the edges
    # adjacent to it take the layer speed rather than a nodal average.
    c_big = np.concatenate([np.full(nl, speeds[0] or 0.0), cn, np.full(nr, speeds[1] or 0.0)])
    e_big = np.concatenate(
        [np.full(nl, speeds[0] or 0.0), c.midpoints(), np.full(nr, speeds[1] or 0.0)]
    )
    speed = WaveSpeedField(c_big, e_big)
    sides = tuple(Neumann() if isinstance(s, Impedance) else s for s in bc.sides)
    Lbig = build_laplacian_1d(big, speed, BoundarySpec(sides))
    ep = ExtendedProblem(big, speed, Lbig, nl, n, np.empty(0), np.empty(0), np.empty(0))
    ev0, ev1, ef = ep.extend(v0, v1, f)
    object.__setattr__(ep, "v0", ev0)
    object.__setattr__(ep, "v1", ev1)
    object.__setattr__(ep, "f", ef)
    return ep


def restrict(ep: ExtendedProblem, z: np.ndarray) -> np.ndarray:
    """Copy of the values of ``z`` on the original interval."""
    z = np.asarray(z)
    if z.shape[-1] != ep.grid.n_nodes:
        raise ShapeError(f"expected {ep.grid.n_nodes} values, got {z.shape[-1]}")
    return z[..., ep.inner].copy()
