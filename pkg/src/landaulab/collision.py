"""Assembly of the collision operators on the velocity lattice.

All matrices act on quadrature-scaled samples (see :mod:`landaulab.grid`), so
the discrete L2 adjoint is the plain transpose and every self-adjoint operator
below is a symmetric matrix.

The diffusion part is assembled from its conjugated weak form

    <-Lambda~ f, g> = int theta grad(M^{-1/2} f) . grad(M^{-1/2} g) M dxi,

discretized cell by cell with centered differences at cell midpoints.  Weight
ratios are combined in exponent space, M-factors never overflow and the matrix
is symmetric negative semidefinite by construction with kernel span{sqrt(M)}.

The integral part uses the closed-form kernel

    k(xi, xs) = sqrt(M(xi) M(xs)) [ xi^T Phi(eta) xs - 2|eta|^{gamma+2}
                                    + 2(gamma+3)|eta|^gamma ],   eta = xi - xs,

sampled on node pairs with trapezoid weights.  The self-cell is modelled by
integrating the dominant 2(gamma+3)|eta|^gamma term over a ball of radius h/2
when gamma < 0 and by the finite |eta| -> 0 limit otherwise.  A final
symmetric rank-5 correction ties the discrete kernel of Lambda~ + K~ exactly
to the five collision invariants; the correction is the minimum-Frobenius
symmetric update with that property (the usual conservative-discretization
projection) and its size is recorded on the result.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.fft import irfftn, next_fast_len, rfftn

from .coeffs import CoeffProfile, build_coeff_profile, theta_fields
from .grid import (
    VelocityGrid,
    gradient_matrices,
    gradient_matrices_scaled,
)

_ROW_BLOCK_BUDGET = 1_000_000  # pair entries per assembly block


def ktilde_kernel(xi: np.ndarray, xs: np.ndarray, gamma: float) -> float:
    """Closed-form kernel of the integral operator at one off-diagonal pair."""
    xi = np.asarray(xi, dtype=float)
    xs = np.asarray(xs, dtype=float)
    eta = xi - xs
    r2 = float(eta @ eta)
    if r2 == 0.0:
        raise ValueError("ktilde_kernel requires distinct points")
    quad_term = r2 ** (0.5 * gamma) * (r2 * float(xi @ xs) - float(xi @ eta) * float(xs @ eta))
    bracket = quad_term - 2.0 * r2 ** (0.5 * (gamma + 2.0)) + 2.0 * (gamma + 3.0) * r2 ** (0.5 * gamma)
    log_mm = -0.25 * (float(xi @ xi) + float(xs @ xs)) - 1.5 * np.log(2.0 * np.pi)
    return float(np.exp(log_mm) * bracket)


def chi_bump(r) -> np.ndarray:
    """C^2 cutoff: 1 on [0, 1], 0 beyond 2, quintic smoothstep between."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.ones_like(r)
    out[r >= 2.0] = 0.0
    mid = (r > 1.0) & (r < 2.0)
    x = r[mid] - 1.0
    out[mid] = 1.0 - x**3 * (10.0 - 15.0 * x + 6.0 * x**2)
    return out


@dataclass
class CollisionOperators:
    """Assembled operator family for one grid/profile pair."""

    grid: VelocityGrid
    profile: CoeffProfile
    lambda_tilde: np.ndarray
    k_tilde: np.ndarray
    k_singular: np.ndarray
    k_regular: np.ndarray
    lambda_mod: np.ndarray
    k_mod: np.ndarray
    l_full: np.ndarray
    invariants5: np.ndarray
    c0_hat: float
    nu0: float
    coercivity_matrix: np.ndarray
    conservation_fix_norm: float
    eigen_cache: OrderedDict = field(default_factory=OrderedDict, repr=False)
    eigen_cache_size: int = 16  # dense eigensystems are ~n^2 complex entries each
    _cache_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def gamma(self) -> float:
        return self.grid.spec.gamma

    def cache_get_or_compute(self, key, compute):
        """Thread-safe LRU lookup used for per-mode eigensystems."""
        with self._cache_lock:
            if key in self.eigen_cache:
                self.eigen_cache.move_to_end(key)
                return self.eigen_cache[key]
        value = compute()
        with self._cache_lock:
            if key not in self.eigen_cache:
                self.eigen_cache[key] = value
                while len(self.eigen_cache) > self.eigen_cache_size:
                    self.eigen_cache.popitem(last=False)
            self.eigen_cache.move_to_end(key)
            return self.eigen_cache[key]


def _cell_quadratic_form(grid: VelocityGrid, profile: CoeffProfile) -> np.ndarray:
    """Nodal bilinear form S with f^T S g = weak-form energy, assembled per cell.

    Uses 2x2x2 Gauss quadrature of the trilinear interpolant's gradient.  A
    single midpoint evaluation would leave the checkerboard shape modes in the
    local null space (the gradient of the interpolant vanishes at the center
    for them), producing spurious near-null directions of the whole form; the
    tensor Gauss rule is unisolvent for the per-component bilinears, so only
    constants survive.
    """
    n, h = grid.n, grid.h
    axis = grid.axis
    c = np.arange(n - 1)
    ci, cj, ck = np.meshgrid(c, c, c, indexing="ij")
    ci, cj, ck = ci.ravel(), cj.ravel(), ck.ravel()

    offsets = [(a, b, cz) for a in (0, 1) for b in (0, 1) for cz in (0, 1)]
    corner_idx = np.stack(
        [((ci + a) * n + (cj + b)) * n + (ck + cz) for a, b, cz in offsets], axis=1
    )
    corners = np.stack([axis[ci], axis[cj], axis[ck]], axis=1)
    log_m_corner = grid.log_maxwellian[corner_idx]

    gauss = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)  # on the unit interval

    def _shape(flag: int, t: float) -> float:
        return t if flag else 1.0 - t

    N = grid.size
    S = np.zeros((N, N))
    w_q = h**3 / 8.0
    for qa in gauss:
        for qb in gauss:
            for qc in gauss:
                q = np.array([qa, qb, qc])
                pts = corners + h * q[None, :]
                l1, l2, P = theta_fields(pts, profile)
                theta = (
                    l2[:, None, None] * np.eye(3)
                    + (l1 - l2)[:, None, None] * P
                )
                G = np.zeros((3, 8))
                for col, (a, b, cz) in enumerate(offsets):
                    la, lb, lc = _shape(a, qa), _shape(b, qb), _shape(cz, qc)
                    G[0, col] = (2 * a - 1) / h * lb * lc
                    G[1, col] = (2 * b - 1) / h * la * lc
                    G[2, col] = (2 * cz - 1) / h * la * lb
                E = np.einsum("da,cde,eb->cab", G, theta, G)
                log_mq = (
                    -0.5 * np.einsum("ij,ij->i", pts, pts)
                    - 1.5 * np.log(2.0 * np.pi)
                )
                d = np.exp(0.5 * (log_mq[:, None] - log_m_corner))
                cell = w_q * d[:, :, None] * d[:, None, :] * E
                for a in range(8):
                    for b in range(8):
                        np.add.at(
                            S, (corner_idx[:, a], corner_idx[:, b]), cell[:, a, b]
                        )
    return S


def assemble_lambda_tilde(grid: VelocityGrid, profile: CoeffProfile) -> np.ndarray:
    """Weak-form diffusion operator in the scaled representation (symmetric NSD)."""
    S = _cell_quadratic_form(grid, profile)
    inv_sw = 1.0 / grid.sqrt_weights
    neg = inv_sw[:, None] * S * inv_sw[None, :]
    asym = np.linalg.norm(neg - neg.T) / max(np.linalg.norm(neg), 1e-300)
    if asym > 1e-12:
        raise RuntimeError(f"diffusion assembly lost symmetry (relative {asym:.3e})")
    neg = 0.5 * (neg + neg.T)
    return -neg


def _kernel_block(pi: np.ndarray, pj: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel bracket on a block of point pairs; coincident pairs produce 0."""
    eta = pi[:, None, :] - pj[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", eta, eta)
    dot = pi @ pj.T
    a = np.einsum("ik,ijk->ij", pi, eta)
    b = np.einsum("jk,ijk->ij", pj, eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        rg = np.where(r2 > 0.0, r2, 1.0) ** (0.5 * gamma)
        bracket = rg * (r2 * dot - a * b) - 2.0 * rg * r2 + 2.0 * (gamma + 3.0) * rg
    bracket[r2 == 0.0] = 0.0
    return bracket


def _ktilde_diag_scaled(grid: VelocityGrid) -> np.ndarray:
    """Self-cell entries in the scaled representation."""
    gamma = grid.spec.gamma
    if gamma < 0.0:
        # polar integral of 2(gamma+3)|eta|^gamma over a ball of radius h/2,
        # remaining factors at the cell center
        return 8.0 * np.pi * grid.maxwellian * (0.5 * grid.h) ** (gamma + 3.0)
    if gamma == 0.0:
        return grid.weights * 6.0 * grid.maxwellian
    return np.zeros(grid.size)


def assemble_k_tilde_raw(grid: VelocityGrid) -> np.ndarray:
    """Quadrature matrix of the kernel in the scaled representation."""
    pts = grid.points
    gamma = grid.spec.gamma
    N = grid.size
    sm = grid.sqrt_maxwellian * grid.sqrt_weights
    K = np.empty((N, N))
    block = max(1, _ROW_BLOCK_BUDGET // N)
    for start in range(0, N, block):
        stop = min(N, start + block)
        br = _kernel_block(pts[start:stop], pts, gamma)
        K[start:stop] = sm[start:stop, None] * br * sm[None, :]
    K[np.diag_indices(N)] = _ktilde_diag_scaled(grid)
    return 0.5 * (K + K.T)


def collision_invariants(grid: VelocityGrid) -> np.ndarray:
    """Orthonormal scaled-sample basis of {sqrt(M), xi_d sqrt(M), |xi|^2 sqrt(M)}."""
    sm = grid.sqrt_maxwellian * grid.sqrt_weights
    cols = [sm]
    cols.extend(grid.points[:, d] * sm for d in range(3))
    cols.append(np.einsum("ij,ij->i", grid.points, grid.points) * sm)
    raw = np.stack(cols, axis=1)
    Q, R = np.linalg.qr(raw)
    signs = np.sign(np.diag(R))
    signs[signs == 0.0] = 1.0
    return Q * signs[None, :]


def _conservative_correction(l_raw: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Minimum-norm symmetric dK with (l_raw + dK) V = 0."""
    Rres = -(l_raw @ V)
    S5 = V.T @ Rres
    return Rres @ V.T + V @ Rres.T - V @ S5.T @ V.T


def coercivity_matrix(grid: VelocityGrid, profile: CoeffProfile) -> np.ndarray:
    """Symmetric positive form of the weighted dissipation norm.

    f^T B f = ||<xi>^{gamma/2+1} f||^2 + ||<xi>^{gamma/2} P grad f||^2
              + ||<xi>^{gamma/2+1} (I-P) grad f||^2,
    with P the projector onto xi (zero at the origin) and finite-difference
    gradients.
    """
    gamma = grid.spec.gamma
    bracket = grid.bracket()
    _, _, P = theta_fields(grid.points, profile)
    Q = np.eye(3)[None, :, :] - P
    cP = bracket**gamma
    cQ = bracket ** (gamma + 2.0)

    G = gradient_matrices_scaled(grid)
    B = sp.diags(cQ).toarray()
    for d in range(3):
        for e in range(3):
            wde = cP * P[:, d, e] + cQ * Q[:, d, e]
            B += (G[d].T @ sp.diags(wde) @ G[e]).toarray()
    return 0.5 * (B + B.T)


def _smallest_generalized(a: np.ndarray, b: np.ndarray) -> float:
    vals = sla.eigh(a, b, subset_by_index=[0, 0], eigvals_only=True)
    return float(vals[0])


def assemble_collision(
    grid: VelocityGrid,
    profile: CoeffProfile | None = None,
    eigen_cache_size: int = 64,
) -> CollisionOperators:
    """Build the full operator family (diffusion, integral part, splits)."""
    if profile is None:
        profile = build_coeff_profile(grid.spec)
    lam_tilde = assemble_lambda_tilde(grid, profile)
    k_raw = assemble_k_tilde_raw(grid)
    V = collision_invariants(grid)

    dK = _conservative_correction(lam_tilde + k_raw, V)
    k_tilde = 0.5 * ((k_raw + dK) + (k_raw + dK).T)
    fix_norm = float(np.linalg.norm(dK))

    dist = np.linalg.norm(grid.points[:, None, :] - grid.points[None, :, :], axis=2)
    mask = chi_bump(dist / grid.spec.cutoff_d)
    k_singular = 0.5 * ((mask * k_raw) + (mask * k_raw).T)
    k_regular = k_tilde - k_singular

    m_hat = V[:, 0]
    p0 = np.outer(m_hat, m_hat)
    B = coercivity_matrix(grid, profile)

    nu0 = grid.spec.nu0
    for _ in range(8):
        lambda_mod = lam_tilde - nu0 * p0
        c0_hat = _smallest_generalized(-lambda_mod, B)
        if c0_hat > 0.0:
            break
        nu0 *= 2.0
    else:
        raise ArithmeticError("coercivity constant stayed non-positive while raising nu0")

    k_mod = k_tilde + nu0 * p0
    l_full = 0.5 * ((lambda_mod + k_mod) + (lambda_mod + k_mod).T)

    return CollisionOperators(
        grid=grid,
        profile=profile,
        lambda_tilde=lam_tilde,
        k_tilde=k_tilde,
        k_singular=k_singular,
        k_regular=k_regular,
        lambda_mod=lambda_mod,
        k_mod=k_mod,
        l_full=l_full,
        invariants5=V,
        c0_hat=c0_hat,
        nu0=nu0,
        coercivity_matrix=B,
        conservation_fix_norm=fix_norm,
        eigen_cache_size=eigen_cache_size,
    )


def p0_project(ops: CollisionOperators, u: np.ndarray) -> np.ndarray:
    """Rank-one projection onto the normalized sqrt-Maxwellian direction."""
    m_hat = ops.invariants5[:, 0]
    return m_hat * np.vdot(m_hat, u)


# ---------------------------------------------------------------------------
# strong-form application (independent discretization used for cross-checks)

def lambda_tilde_strong_apply(
    grid: VelocityGrid, profile: CoeffProfile, f_nodal: np.ndarray
) -> np.ndarray:
    """Apply grad.(theta grad f) + (1/2) div(theta xi) f - (1/4)(xi, theta xi) f.

    Expanding the conjugated divergence form gives these coefficients; theta's
    radial eigenstructure makes theta xi = lambda1 xi.
    """
    l1, l2, P = theta_fields(grid.points, profile)
    theta = l2[:, None, None] * np.eye(3) + (l1 - l2)[:, None, None] * P
    G = gradient_matrices(grid)
    grad = np.stack([Gd @ f_nodal for Gd in G])
    flux = np.einsum("ide,ei->di", theta, grad)
    div_flux = sum(G[d] @ flux[d] for d in range(3))

    b_field = l1[:, None] * grid.points
    div_b = sum(G[d] @ b_field[:, d] for d in range(3))
    r2 = np.einsum("ij,ij->i", grid.points, grid.points)
    return div_flux + 0.5 * div_b * f_nodal - 0.25 * l1 * r2 * f_nodal


# ---------------------------------------------------------------------------
# cutoff scaling scan

@dataclass
class SingularScan:
    d_values: np.ndarray
    norms: np.ndarray
    slope: float


def _offset_kernels(grid: VelocityGrid, d_cut: float):
    """Cutoff kernel factors tabulated on the (2n-1)^3 offset lattice."""
    n, h = grid.n, grid.h
    gamma = grid.spec.gamma
    off = h * np.arange(-(n - 1), n)
    Ox, Oy, Oz = np.meshgrid(off, off, off, indexing="ij")
    eta = np.stack([Ox, Oy, Oz], axis=-1)
    r2 = np.einsum("...k,...k->...", eta, eta)
    center = (n - 1, n - 1, n - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rg = np.where(r2 > 0.0, r2, 1.0) ** (0.5 * gamma)
        mask = chi_bump(np.sqrt(r2) / d_cut)
        quad = rg[..., None, None] * (
            r2[..., None, None] * np.eye(3) - eta[..., :, None] * eta[..., None, :]
        )
        scal = mask * (2.0 * rg * r2 - 2.0 * (gamma + 3.0) * rg)
        quad *= mask[..., None, None]
    quad[center] = 0.0
    scal[center] = 0.0
    return quad, scal


def _ks_matvec_factory(grid: VelocityGrid, d_cut: float):
    """FFT-convolution matvec of the cutoff operator in the scaled representation.

    Matches the dense quadrature matrix entry for entry: the kernel is a
    function of the offset eta times output-side factors, so the lattice sum
    is a padded linear convolution.  The seven kernel transforms are cached
    at build time, so one apply costs a single forward FFT plus seven
    pointwise products and inverse FFTs.
    """
    n = grid.n
    shape = grid.shape
    quad, scal = _offset_kernels(grid, d_cut)
    smw = (grid.sqrt_maxwellian * grid.sqrt_weights).reshape(shape)
    xi = grid.points.reshape(n, n, n, 3)
    diag = _ktilde_diag_scaled(grid)  # chi(0) = 1: the self-cell stays in K_s

    L = next_fast_len(3 * n - 2)
    fs = (L, L, L)
    # central n-block of the full linear convolution of an n and a 2n-1 signal
    sl = (slice(n - 1, 2 * n - 1),) * 3
    terms = []
    for d in range(3):
        for e in range(d, 3):
            terms.append(
                (
                    (2.0 if e != d else 1.0) * xi[..., d] * xi[..., e],
                    rfftn(quad[..., d, e], s=fs),
                )
            )
    scal_hat = rfftn(scal, s=fs)

    def matvec(u: np.ndarray) -> np.ndarray:
        u = np.ravel(u)
        inp = smw * u.reshape(shape)
        F = rfftn(inp, s=fs)
        acc = -irfftn(F * scal_hat, s=fs)[sl]
        for factor, k_hat in terms:
            acc += factor * irfftn(F * k_hat, s=fs)[sl]
        out = smw * acc
        return out.ravel() + diag * u

    return matvec


def singular_norm_scan(
    grid: VelocityGrid, d_values, seed: int = 0
) -> SingularScan:
    """Operator norm of (d/dxi) o K_s(D) against D, with its log-log slope."""
    d_values = np.sort(np.asarray(d_values, dtype=float))
    if d_values.size < 4:
        raise ValueError("need at least 4 cutoff values for a slope")
    lo, hi = 2.0 * grid.h, 0.45 * grid.spec.radius
    if np.any(d_values <= lo) or np.any(d_values > hi):
        raise ValueError(
            f"cutoff values must lie in ({lo:.4g}, {hi:.4g}): the lattice needs "
            "off-diagonal content below and an untruncated cutoff ball above"
        )

    G = gradient_matrices_scaled(grid)
    gram = sum(Gd.T @ Gd for Gd in G).tocsr()
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(grid.size)
    norms = []
    for d_cut in d_values:
        ks = _ks_matvec_factory(grid, float(d_cut))
        # power iteration on (grad o K_s)^T (grad o K_s); K_s is symmetric
        u = v0 / np.linalg.norm(v0)
        sigma = 0.0
        for it in range(60):
            z = ks(gram @ ks(u))
            sigma_new = float(np.sqrt(max(np.dot(u, z), 0.0)))
            if it > 4 and abs(sigma_new - sigma) <= 1e-8 * sigma_new:
                sigma = sigma_new
                break
            sigma = sigma_new
            u = z / np.linalg.norm(z)
        norms.append(sigma)
    norms = np.array(norms)
    slope = float(np.polyfit(np.log(d_values), np.log(norms), 1)[0])
    return SingularScan(d_values=d_values, norms=norms, slope=slope)
