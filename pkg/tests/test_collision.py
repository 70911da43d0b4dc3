import numpy as np
import pytest

from landaulab.collision import (
    _ks_matvec_factory,
    assemble_collision,
    assemble_k_tilde_raw,
    chi_bump,
    collision_invariants,
    ktilde_kernel,
    lambda_tilde_strong_apply,
    p0_project,
    singular_norm_scan,
)
from landaulab.coeffs import build_coeff_profile
from landaulab.grid import GridSpec, build_grid
from landaulab.harness import fd_kernel_reference

_KERNEL_PAIRS = [
    (np.array([0.3, -0.2, 0.5]), np.array([-0.4, 0.1, 0.2])),
    (np.array([1.2, 0.8, -0.3]), np.array([0.1, -1.1, 0.6])),
    (np.array([-2.0, 0.4, 0.9]), np.array([1.5, 0.2, -0.7])),
]


def test_kernel_frozen_values():
    xi, xs = _KERNEL_PAIRS[0]
    assert ktilde_kernel(xi, xs, 0.0) == pytest.approx(
        0.25958832119297987, rel=1e-12
    )
    assert ktilde_kernel(xi, xs, -1.0) == pytest.approx(
        0.18327343772923926, rel=1e-12
    )


def test_kernel_exchange_symmetry():
    for xi, xs in _KERNEL_PAIRS:
        for gamma in (0.0, -1.0, -1.5):
            assert ktilde_kernel(xi, xs, gamma) == pytest.approx(
                ktilde_kernel(xs, xi, gamma), rel=1e-12
            )


def test_kernel_against_finite_difference_rebuild():
    # the closed-form scalar terms versus Richardson-extrapolated second
    # differences of the matrix field; independent of the kernel algebra
    for xi, xs in _KERNEL_PAIRS:
        for gamma in (0.0, -1.0):
            ref = fd_kernel_reference(xi, xs, gamma)
            val = ktilde_kernel(xi, xs, gamma)
            assert val == pytest.approx(ref, rel=1e-6)


def test_kernel_rejects_coincident_points():
    with pytest.raises(ValueError):
        ktilde_kernel(np.ones(3), np.ones(3), 0.0)


def test_chi_bump_shape():
    r = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    vals = chi_bump(r)
    np.testing.assert_allclose(vals[:3], 1.0, rtol=1e-14)
    assert vals[3] == pytest.approx(0.5, rel=1e-12)  # smoothstep midpoint
    np.testing.assert_allclose(vals[4:], 0.0, atol=1e-14)
    # monotone decrease across the blend zone
    fine = chi_bump(np.linspace(1.0, 2.0, 101))
    assert np.all(np.diff(fine) <= 1e-14)


def test_assembled_split_identities(ops9):
    K = ops9.k_tilde
    np.testing.assert_allclose(
        ops9.k_singular + ops9.k_regular, K, rtol=0, atol=1e-13 * np.abs(K).max()
    )
    np.testing.assert_allclose(ops9.l_full, ops9.l_full.T, atol=1e-12)
    np.testing.assert_allclose(
        ops9.l_full, ops9.lambda_mod + ops9.k_mod, rtol=0,
        atol=1e-12 * np.abs(ops9.l_full).max(),
    )
    for M in (ops9.lambda_tilde, K, ops9.k_singular, ops9.lambda_mod, ops9.k_mod):
        np.testing.assert_allclose(M, M.T, atol=1e-11 * max(1.0, np.abs(M).max()))


def test_invariants_annihilated(ops9):
    V = ops9.invariants5
    assert V.shape == (ops9.grid.size, 5)
    np.testing.assert_allclose(V.T @ V, np.eye(5), atol=1e-12)
    resid = ops9.l_full @ V
    scale = np.linalg.norm(ops9.l_full)
    assert np.linalg.norm(resid) <= 1e-12 * scale


def test_collision_invariants_span(grid9):
    V = collision_invariants(grid9)
    assert V.shape == (grid9.size, 5)
    np.testing.assert_allclose(V.T @ V, np.eye(5), atol=1e-12)
    # the span covers mass, momentum, and energy moments
    sm = grid9.sqrt_maxwellian * grid9.sqrt_weights
    for moment in (sm, grid9.points[:, 2] * sm, grid9.radii() ** 2 * sm):
        resid = moment - V @ (V.T @ moment)
        assert np.linalg.norm(resid) < 1e-10 * np.linalg.norm(moment)


def test_coercivity_constants_frozen(ops9, ops9_gm1):
    assert ops9.c0_hat == pytest.approx(0.12101053807552378, rel=1e-8)
    assert ops9_gm1.c0_hat == pytest.approx(0.336906552529267, rel=1e-8)
    assert ops9.conservation_fix_norm == pytest.approx(5.708650804665717, rel=1e-6)


def test_coercivity_inequality_random_vectors(ops9, rng):
    B = ops9.coercivity_matrix
    A = -ops9.lambda_mod
    for _ in range(20):
        f = rng.standard_normal(ops9.grid.size)
        lhs = float(f @ A @ f)
        rhs = float(f @ B @ f)
        assert lhs >= ops9.c0_hat * rhs - 1e-10 * max(rhs, 1.0)


def test_checkerboard_mode_is_damped(ops9):
    # alternating-sign lattice mode: the stabilized cell quadrature must not
    # leave grid-scale oscillations in the kernel of the diffusion form
    g = ops9.grid
    idx = np.indices(g.shape).sum(axis=0).ravel()
    u = np.where(idx % 2 == 0, 1.0, -1.0) * g.sqrt_maxwellian * g.sqrt_weights
    V = ops9.invariants5
    u = u - V @ (V.T @ u)
    quad = float(u @ ops9.l_full @ u)
    assert quad < 0.0
    assert abs(quad) > 1e-3 * float(u @ u)


def test_weak_form_momentum_anchor(ops9):
    # for gamma = 0 the diffusion form on the momentum direction integrates
    # in closed form: q(xi_1 sqrt M) = -int M theta_11 = -4
    g = ops9.grid
    u = g.sqrt_weights * g.points[:, 0] * g.sqrt_maxwellian
    q = float(u @ ops9.lambda_tilde @ u)
    assert q == pytest.approx(-4.0, abs=0.01)


def test_weak_form_shear_anchor(ops9):
    # g = xi_1 xi_2 is trilinear, so the cell interpolation is exact and the
    # closed-form value -int M (theta grad g, grad g) = -10 is hit sharply
    g = ops9.grid
    u = g.sqrt_weights * g.points[:, 0] * g.points[:, 1] * g.sqrt_maxwellian
    q = float(u @ ops9.lambda_tilde @ u)
    assert q == pytest.approx(-10.0, abs=0.05)


def test_strong_form_annihilates_maxwellian_under_refinement():
    # sqrt(M) is an exact null function of the continuum operator; the lattice
    # residual is pure truncation error and must shrink as the grid refines
    vals = []
    for n in (7, 11):
        spec = GridSpec(n_per_axis=n, gamma=0.0)
        grid = build_grid(spec)
        prof = build_coeff_profile(spec)
        res = lambda_tilde_strong_apply(grid, prof, grid.sqrt_maxwellian)
        vals.append(float(np.linalg.norm(grid.weights * grid.sqrt_maxwellian * res)))
    assert vals[0] < 0.6
    assert vals[1] < vals[0] / 3.0


def test_p0_projection(ops9, rng):
    u = rng.standard_normal(ops9.grid.size)
    p = p0_project(ops9, u)
    # idempotent rank-one projection along the first invariant
    np.testing.assert_allclose(p0_project(ops9, p), p, rtol=1e-10, atol=1e-13)
    m_hat = ops9.invariants5[:, 0]
    assert abs(np.vdot(m_hat, u - p)) < 1e-10


def test_fft_apply_matches_dense_mask(grid9, rng):
    # the convolution path must reproduce the dense masked kernel exactly,
    # including the regularized self-interaction cell; a cutoff well above the
    # spacing exercises many off-diagonal shells
    d_cut = 1.8
    apply_ks = _ks_matvec_factory(grid9, d_cut)
    raw = assemble_k_tilde_raw(grid9)
    diff = grid9.points[:, None, :] - grid9.points[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    dense = chi_bump(dist / d_cut) * raw
    for _ in range(3):
        u = rng.standard_normal(grid9.size)
        np.testing.assert_allclose(
            apply_ks(u), dense @ u, rtol=0,
            atol=1e-10 * np.abs(dense @ u).max(),
        )


@pytest.fixture(scope="module")
def scan_grid():
    # the scan demands cutoffs in (2h, 0.45 R], so it needs a lattice finer
    # than the production n = 9 operators
    return build_grid(GridSpec(n_per_axis=15))


def test_singular_scan_validation(scan_grid):
    with pytest.raises(ValueError, match="at least 4"):
        singular_norm_scan(scan_grid, [1.5, 1.7, 2.0])
    # below twice the spacing the ball holds no complete shell
    with pytest.raises(ValueError):
        singular_norm_scan(scan_grid, [0.5 * scan_grid.h, 1.5, 1.7, 2.0])
    # beyond 0.45 R the cutoff ball leaks out of the box
    with pytest.raises(ValueError):
        singular_norm_scan(scan_grid, [1.5, 1.6, 1.7, 0.6 * scan_grid.spec.radius])


def test_singular_scan_norms_grow(scan_grid):
    d_vals = np.array([1.4, 1.6, 1.8, 2.0])
    scan = singular_norm_scan(scan_grid, d_vals, seed=3)
    assert np.all(scan.norms > 0)
    assert np.all(np.diff(scan.norms) > 0)
    assert np.isfinite(scan.slope)
    np.testing.assert_allclose(scan.d_values, np.sort(d_vals))
