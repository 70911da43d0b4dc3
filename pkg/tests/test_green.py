import numpy as np
import pytest
from scipy.linalg import expm

from landaulab.collision import collision_invariants
from landaulab.green import (
    green_snapshot_series,
    orbit_representative,
    parseval_norm,
    prepare_initial,
    synthesize_green,
)
from landaulab.mode import PHASE_BETA, mode_operator
from landaulab.spectral import GapEstimate

EPS = 0.5


def _gap(delta_hat: float, tau_hat: float = 3.1542139292569065) -> GapEstimate:
    """Hand-built threshold record; only the two scalars matter downstream."""
    return GapEstimate(
        tau_hat=tau_hat,
        delta_hat=delta_hat,
        kappa_star=PHASE_BETA * delta_hat,
        khat=np.array([1.0, 0.0, 0.0]),
        kappa_grid=np.array([PHASE_BETA * delta_hat]),
        max_real_parts=np.array([-0.1]),
        counts_above=np.array([5]),
    )


def test_prepare_initial_validation(grid9):
    with pytest.raises(ValueError, match="unknown initial-data keys"):
        prepare_initial({"profile": "cosine_mode_poly", "nope": 1}, grid9, EPS)
    with pytest.raises(ValueError, match="unknown profile"):
        prepare_initial({"profile": "sphere_harmonic"}, grid9, EPS)
    with pytest.raises(ValueError, match="width_fraction"):
        prepare_initial(
            {"profile": "bump1d_poly", "width_fraction": 0.0}, grid9, EPS
        )
    with pytest.raises(ValueError, match="width_fraction"):
        prepare_initial(
            {"profile": "bump1d_poly", "width_fraction": 1.5}, grid9, EPS
        )


def test_cosine_mode_structure(grid9):
    field = prepare_initial({"profile": "cosine_mode_poly"}, grid9, EPS)
    assert field.profile_name == "cosine_mode_poly"
    assert set(field.modes()) == {(0, 0, 0), (1, 0, 0), (-1, 0, 0)}
    c_plus = field.coefficient((1, 0, 0))
    c_minus = field.coefficient((-1, 0, 0))
    np.testing.assert_allclose(c_plus, c_minus, rtol=1e-14)
    np.testing.assert_allclose(c_plus, 0.5 * field.base, rtol=1e-14)
    assert field.coefficient_norm_sq((1, 0, 0)) == pytest.approx(
        float(np.vdot(c_plus, c_plus).real), rel=1e-12
    )
    # the polynomial velocity factor is carried against sqrt(M) sqrt(w)
    pts = grid9.points
    expected = (
        (1.0 + pts[:, 0] + pts[:, 0] * pts[:, 1])
        * grid9.sqrt_maxwellian
        * grid9.sqrt_weights
    )
    np.testing.assert_allclose(field.base, expected, rtol=1e-13)
    assert field.tail_estimate == 0.0


def test_zero_mean_enforcement(grid9):
    field = prepare_initial({"profile": "bump1d_poly"}, grid9, EPS)
    assert field.zero_mean
    V = collision_invariants(grid9)
    mean_coeff = field.coefficient((0, 0, 0))
    assert np.linalg.norm(V.T @ mean_coeff) < 1e-12 * max(
        1.0, np.linalg.norm(mean_coeff)
    )
    # opting out keeps the raw coefficient
    raw = prepare_initial(
        {"profile": "bump1d_poly", "zero_mean": False}, grid9, EPS
    )
    assert np.linalg.norm(V.T @ raw.coefficient((0, 0, 0))) > 1e-6


def test_parseval_norm_weights(grid9):
    field = prepare_initial({"profile": "cosine_mode_poly"}, grid9, EPS)
    base_sq = float(np.vdot(field.base, field.base).real)
    # two half-amplitude modes at |k| = 1
    expect0 = np.sqrt(2.0 * 0.25 * base_sq)
    assert parseval_norm(field, 0) == pytest.approx(expect0, rel=1e-12)
    be = PHASE_BETA * EPS
    ratio = parseval_norm(field, 2) / parseval_norm(field, 0)
    assert ratio == pytest.approx(1.0 + be**2, rel=1e-12)
    with pytest.raises(ValueError):
        parseval_norm(field, -1)


def test_snapshot_total_matches_parseval_at_t0(ops9):
    field = prepare_initial({"profile": "cosine_mode_poly"}, ops9.grid, EPS)
    gap = _gap(delta_hat=0.318)
    snaps = green_snapshot_series(field, ops9, gap, np.array([0.0, 0.4]))
    assert snaps[0].t == 0.0
    assert snaps[0].norm_total[0] == pytest.approx(parseval_norm(field, 0), rel=1e-10)
    assert snaps[0].norm_total[2] == pytest.approx(parseval_norm(field, 2), rel=1e-10)
    # dissipative evolution: the total only decreases
    assert snaps[1].norm_total[0] < snaps[0].norm_total[0]


def test_bucket_split_is_exact(ops9):
    # a threshold above eps puts the 1-mode in the long bucket, where the
    # fluid/perp split must reassemble the full per-mode state
    field = prepare_initial({"profile": "cosine_mode_poly"}, ops9.grid, EPS)
    gap = _gap(delta_hat=0.9)
    times = np.array([0.0, 0.3, 0.8])
    snaps, per_mode = green_snapshot_series(
        field, ops9, gap, times, keep_modes=True
    )
    rec = per_mode[(1, 0, 0)]
    np.testing.assert_allclose(
        rec["fluid"] + rec["perp"], rec["full"], atol=1e-10 * np.abs(rec["full"]).max()
    )
    for s in (0, 2):
        for snap in snaps:
            assert snap.norm_short[s] == 0.0
    # short classification flips when the threshold drops below eps|k|
    gap_short = _gap(delta_hat=0.2)
    snaps_s = green_snapshot_series(field, ops9, gap_short, times)
    assert snaps_s[1].norm_short[0] > 0.0
    assert snaps_s[1].norm_fluid[0] == 0.0


def test_mode_states_match_direct_exponential(ops9):
    field = prepare_initial({"profile": "cosine_mode_poly"}, ops9.grid, EPS)
    gap = _gap(delta_hat=0.318)
    t = 0.5
    _, per_mode = green_snapshot_series(
        field, ops9, gap, np.array([0.0, t]), keep_modes=True
    )
    u0 = field.coefficient((1, 0, 0))
    A = mode_operator(ops9, k=(1, 0, 0)).matrix
    ref = expm(A * t) @ u0
    got = per_mode[(1, 0, 0)]["full"][1]
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-8


def test_synthesize_green_single_time(ops9):
    field = prepare_initial({"profile": "cosine_mode_poly"}, ops9.grid, EPS)
    gap = _gap(delta_hat=0.9)
    snap = synthesize_green(field, ops9, gap, 0.25)
    assert snap.t == 0.25
    assert snap.regime_tag in ("I", "II", "III")
    with pytest.raises(ValueError):
        synthesize_green(field, ops9, gap, -0.1)


def test_orbit_representative():
    assert orbit_representative((-2, 1, 0)) == (2, 1, 0)
    assert orbit_representative((0, -3, 3)) == (3, 3, 0)
    assert orbit_representative((0, 0, 0)) == (0, 0, 0)
