"""Velocity lattice, quadrature weights and Maxwellian data.

Functions on the grid appear in two guises:

* nodal values ``f[i] = f(xi_i)``, used by :func:`weighted_inner` and by
  anything pointwise (finite differences, profiles);
* quadrature-scaled samples ``u[i] = sqrt(w_i) * f(xi_i)``, used by every
  operator matrix in this package.  In the scaled representation the discrete
  L2 inner product is the plain complex dot product, so symmetric kernels
  yield symmetric matrices even though boundary nodes carry half weights.

``to_scaled`` / ``to_nodal`` convert between the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GridSpec:
    """Immutable run parameters shared by every module."""

    n_per_axis: int = 9
    radius: float = 4.5
    gamma: float = 0.0
    epsilon: float = 0.5
    cutoff_d: float = 0.5
    nu0: float = 1.0
    k_max: int = 8

    def __post_init__(self) -> None:
        if self.n_per_axis < 5 or self.n_per_axis % 2 == 0:
            raise ValueError("n_per_axis must be odd and at least 5")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not (-2.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (-2, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.cutoff_d > 0:
            raise ValueError("cutoff_d must be positive")
        if not self.nu0 > 0:
            raise ValueError("nu0 must be positive")
        if self.k_max < 0:
            raise ValueError("k_max must be non-negative")


@dataclass
class VelocityGrid:
    """Uniform tensor lattice on [-R, R]^3 with trapezoid weights."""

    spec: GridSpec
    axis: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    sqrt_weights: np.ndarray
    maxwellian: np.ndarray
    sqrt_maxwellian: np.ndarray
    log_maxwellian: np.ndarray
    h: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.spec.n_per_axis

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        n = self.n
        return (n, n, n)

    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    def bracket(self) -> np.ndarray:
        """<xi> = 1 + |xi| at every node."""
        return 1.0 + self.radii()


def build_grid(spec: GridSpec) -> VelocityGrid:
    n, R = spec.n_per_axis, spec.radius
    axis = np.linspace(-R, R, n)
    h = 2.0 * R / (n - 1)
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    points = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    w1 = np.full(n, h)
    w1[0] = w1[-1] = 0.5 * h
    weights = (w1[:, None, None] * w1[None, :, None] * w1[None, None, :]).ravel()

    r2 = np.einsum("ij,ij->i", points, points)
    log_m = -0.5 * r2 - 1.5 * LOG_2PI
    return VelocityGrid(
        spec=spec,
        axis=axis,
        points=points,
        weights=weights,
        sqrt_weights=np.sqrt(weights),
        maxwellian=np.exp(log_m),
        sqrt_maxwellian=np.exp(0.5 * log_m),
        log_maxwellian=log_m,
        h=h,
    )


def weighted_inner(f: np.ndarray, g: np.ndarray, grid: VelocityGrid, s: float = 0.0):
    """Discrete weighted inner product sum_i w_i <xi_i>^{2s} f_i conj(g_i).

    ``f`` and ``g`` are nodal values.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != (grid.size,) or g.shape != (grid.size,):
        raise ValueError(
            f"grid functions must have shape ({grid.size},), "
            f"got {f.shape} and {g.shape}"
        )
    w = grid.weights
    if s != 0.0:
        w = w * grid.bracket() ** (2.0 * s)
    val = np.sum(w * f * np.conj(g))
    if np.iscomplexobj(f) or np.iscomplexobj(g):
        return complex(val)
    return float(val)


def to_scaled(f_nodal: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return f_nodal * grid.sqrt_weights


def to_nodal(u_scaled: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return u_scaled / grid.sqrt_weights


def scaled_inner(u: np.ndarray, v: np.ndarray, grid: VelocityGrid, s: float = 0.0):
    """Inner product of quadrature-scaled samples (plain dot for s=0)."""
    if s == 0.0:
        return np.vdot(v, u)
    return np.vdot(v * grid.bracket() ** s, u * grid.bracket() ** s)


def _diff_matrix_1d(n: int, h: float) -> sp.csr_matrix:
    """Centered first derivative, second-order one-sided rows at the ends."""
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5 / h
        D[i, i + 1] = 0.5 / h
    D[0, 0], D[0, 1], D[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    D[n - 1, n - 3], D[n - 1, n - 2], D[n - 1, n - 1] = 0.5 / h, -2.0 / h, 1.5 / h
    return D.tocsr()


def gradient_matrices(grid: VelocityGrid) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Sparse nodal finite-difference gradients (d/dxi_1, d/dxi_2, d/dxi_3)."""
    key = "grad_nodal"
    if key not in grid._cache:
        n = grid.n
        D = _diff_matrix_1d(n, grid.h)
        eye = sp.identity(n, format="csr")
        Gx = sp.kron(sp.kron(D, eye), eye, format="csr")
        Gy = sp.kron(sp.kron(eye, D), eye, format="csr")
        Gz = sp.kron(sp.kron(eye, eye), D, format="csr")
        grid._cache[key] = (Gx, Gy, Gz)
    return grid._cache[key]


def gradient_matrices_scaled(grid: VelocityGrid):
    """Gradient matrices conjugated into the quadrature-scaled representation."""
    key = "grad_scaled"
    if key not in grid._cache:
        sw = grid.sqrt_weights
        Dw = sp.diags(sw)
        Dwi = sp.diags(1.0 / sw)
        grid._cache[key] = tuple(
            (Dw @ G @ Dwi).tocsr() for G in gradient_matrices(grid)
        )
    return grid._cache[key]


def gradient_scaled(u: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Finite-difference gradient of a scaled-sample function, shape (3, N)."""
    mats = gradient_matrices_scaled(grid)
    return np.stack([G @ u for G in mats])


def sobolev_xi_norm(u: np.ndarray, grid: VelocityGrid, order: int = 0) -> float:
    """Discrete H^order norm in velocity of a scaled-sample function."""
    total = float(np.vdot(u, u).real)
    if order >= 1:
        g = gradient_scaled(u, grid)
        total += float(np.sum(np.abs(g) ** 2))
    if order >= 2:
        mats = gradient_matrices_scaled(grid)
        for Gd in mats:
            gd = Gd @ u
            for Ge in mats:
                total += float(np.sum(np.abs(Ge @ gd) ** 2))
    return float(np.sqrt(total))
