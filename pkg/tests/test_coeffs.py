import numpy as np
import pytest

from landaulab.coeffs import (
    build_coeff_profile,
    phi_matrix,
    radial_projector,
    theta_eigs,
    theta_fields,
    theta_matrix,
)
from landaulab.grid import GridSpec


@pytest.fixture(scope="module")
def profile_m1():
    return build_coeff_profile(GridSpec(n_per_axis=9, gamma=-1.0))


@pytest.fixture(scope="module")
def profile_p0():
    return build_coeff_profile(GridSpec(n_per_axis=9, gamma=0.0))


def test_phi_matrix_projector_structure(rng):
    for gamma in (0.0, -1.0, -1.7, 1.0):
        eta = rng.standard_normal(3)
        P = phi_matrix(eta, gamma)
        r = np.linalg.norm(eta)
        # annihilates its own direction and acts as |eta|^{gamma+2} transversally
        np.testing.assert_allclose(P @ eta, 0.0, atol=1e-12 * r ** (gamma + 3))
        assert np.trace(P) == pytest.approx(2.0 * r ** (gamma + 2), rel=1e-12)
        np.testing.assert_allclose(P, P.T, rtol=1e-12)
    with pytest.raises(ValueError):
        phi_matrix(np.zeros(3), 0.0)


def test_radial_projector():
    xi = np.array([3.0, 0.0, -4.0])
    P = radial_projector(xi)
    np.testing.assert_allclose(P @ xi, xi, rtol=1e-12)
    np.testing.assert_allclose(P @ np.array([4.0, 0.0, 3.0]), 0.0, atol=1e-12)
    assert np.trace(P) == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(radial_projector(np.zeros(3)), 0.0)


def test_theta_eigs_frozen_values():
    # regression anchors from the adaptive quadrature at tight tolerance
    l1, l2 = theta_eigs(2.0, -1.0)
    assert l1 == pytest.approx(0.7698657685909192, rel=1e-9)
    assert l2 == pytest.approx(2.1092983889900205, rel=1e-9)
    l1_origin, l2_origin = theta_eigs(0.0, -1.0)
    assert l1_origin == pytest.approx(1.063846081070487, rel=1e-9)
    # the transverse eigenvalue at the origin agrees with the radial limit
    assert l2_origin == pytest.approx(l1_origin, rel=1e-12)


def test_theta_eigs_maxwell_case_closed_form():
    # gamma = 0 integrates in closed form: lambda1 = 2 and lambda2 = r^2 + 2
    for r in (0.0, 0.7, 1.3, 2.0, 3.5):
        l1, l2 = theta_eigs(r, 0.0)
        assert l1 == pytest.approx(2.0, rel=1e-8)
        assert l2 == pytest.approx(r ** 2 + 2.0, rel=1e-8)


def test_theta_eigs_isotropic_at_origin():
    for gamma in (0.0, -0.5, -1.0):
        l1, l2 = theta_eigs(0.0, gamma)
        assert l1 == pytest.approx(l2, rel=1e-10)
        assert l1 > 0


def test_profile_matches_direct_quadrature(profile_m1, profile_p0):
    for prof, gamma in ((profile_m1, -1.0), (profile_p0, 0.0)):
        for r in (0.4, 1.1, 2.6, 4.0):
            l1_ref, l2_ref = theta_eigs(r, gamma)
            assert float(prof.eval_lambda1(r)) == pytest.approx(l1_ref, rel=1e-6)
            assert float(prof.eval_lambda2(r)) == pytest.approx(l2_ref, rel=1e-6)


def test_profile_clips_to_table_range(profile_m1):
    r_top = profile_m1.radii[-1]
    assert float(profile_m1.eval_lambda1(r_top + 50.0)) == pytest.approx(
        float(profile_m1.eval_lambda1(r_top)), rel=1e-12
    )
    assert float(profile_m1.eval_lambda2(-1.0)) == pytest.approx(
        float(profile_m1.eval_lambda2(0.0)), rel=1e-12
    )


def test_profile_tail_constants(profile_m1, profile_p0):
    # the recorded tail constants close the pinned power laws c1 <r>^gamma and
    # c2 <r>^{gamma+2} near the top of the table; asymptotic, so percent level
    for prof, gamma in ((profile_m1, -1.0), (profile_p0, 0.0)):
        r_t = prof.radii[-1]
        l1_ref, l2_ref = theta_eigs(r_t, gamma)
        assert prof.fitted_c1 * (1.0 + r_t) ** gamma == pytest.approx(
            l1_ref, rel=0.05
        )
        assert prof.fitted_c2 * (1.0 + r_t) ** (gamma + 2.0) == pytest.approx(
            l2_ref, rel=0.05
        )


def test_theta_matrix_spectral_decomposition(profile_m1, rng):
    xi = np.array([0.9, -0.4, 1.2])
    T = theta_matrix(xi, profile_m1)
    r = np.linalg.norm(xi)
    l1_ref = float(profile_m1.eval_lambda1(r))
    l2_ref = float(profile_m1.eval_lambda2(r))
    # radial eigenvector carries lambda1, the transverse plane lambda2
    np.testing.assert_allclose(T @ xi, l1_ref * xi, rtol=1e-9)
    v = np.cross(xi, rng.standard_normal(3))
    np.testing.assert_allclose(T @ v, l2_ref * v, rtol=1e-9)
    np.testing.assert_allclose(T, T.T, rtol=1e-12)
    # origin falls back to the isotropic limit
    np.testing.assert_allclose(
        theta_matrix(np.zeros(3), profile_m1),
        float(profile_m1.eval_lambda1(0.0)) * np.eye(3),
        rtol=1e-12,
    )


def test_theta_fields_match_pointwise_matrix(profile_p0):
    pts = np.array([[0.5, 0.0, -1.0], [1.5, 2.0, 0.3], [0.0, 0.0, 0.0]])
    l1, l2, P = theta_fields(pts, profile_p0)
    for i, xi in enumerate(pts):
        r = np.linalg.norm(xi)
        assert l1[i] == pytest.approx(float(profile_p0.eval_lambda1(r)), rel=1e-10)
        assert l2[i] == pytest.approx(float(profile_p0.eval_lambda2(r)), rel=1e-10)
        np.testing.assert_allclose(P[i], radial_projector(xi), atol=1e-12)
