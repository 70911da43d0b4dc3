"""Envelope fitting, acceptance checks, artifact writers, and the suite runner.

The check functions here are the single source of truth for the acceptance
criteria: the test suite calls them directly and ``run_suite`` calls the same
functions while streaming artifacts (CSV/JSON/binary matrices) to disk, so a
report and a pytest run can never disagree about what passed.

Quadrature oracles for the chain checks (Duhamel and iterated-integral
references) are built from eigendecompositions and composite Simpson rules on
geometrically graded meshes; they share no code with the exponential chain
integrator they validate.
"""

from __future__ import annotations

import csv
import json
import struct
import time
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.signal import find_peaks

from .coeffs import phi_matrix
from .collision import (
    assemble_collision,
    ktilde_kernel,
    singular_norm_scan,
)
from .green import (
    ModeField,
    fluid_mode_sum_envelope,
    fluid_norm_series,
    fluid_pointwise_norms,
    green_snapshot_series,
    parseval_norm,
    prepare_initial,
)
from .grid import GridSpec, build_grid
from .kinetic import (
    PicardChain,
    chain_generators,
    damped_commutator_envelope,
    dt_commutator_check,
    mixture_apply,
    picard_chain,
)
from .mode import PHASE_BETA
from .spectral import (
    GapEstimate,
    classify_regime,
    deep_short_kappa,
    estimate_gap,
    euler_moment_oracle,
    fit_dispersion,
    homogeneous_tau,
    trace_branches,
)

__all__ = [
    "DecayFit",
    "fit_decay",
    "upper_envelope",
    "CheckResult",
    "classify_regime",
    "run_suite",
    "DEFAULT_CONFIG",
    "ConfigError",
    "load_config",
    "export_matrix",
    "read_matrix",
]


# ---------------------------------------------------------------------------
# decay fitting

@dataclass
class DecayFit:
    rate: float
    poly_order: float
    prefactor: float
    window: tuple
    r_squared: float
    model: str


def fit_decay(times, values, model: str = "EXP") -> DecayFit:
    """Least-squares envelope fit of log v against t (and log t).

    EXP fits log v = log C - rate t.  POLY_EXP fits
    log v = log C + poly_order log t - rate t, so an algebraic prefactor
    t^p is read off directly as poly_order = p (and a decaying t^{-p}
    as poly_order = -p); POLY_EXP therefore needs strictly positive times.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError("times and values must have matching shapes")
    if times.size < 8:
        raise ValueError("need at least 8 samples to fit a decay law")
    if np.any(values <= 0.0):
        raise ValueError("values must be positive")
    logv = np.log(values)
    if model == "EXP":
        X = np.stack([np.ones_like(times), -times], axis=1)
    elif model == "POLY_EXP":
        if np.any(times <= 0.0):
            raise ValueError("POLY_EXP needs strictly positive times")
        X = np.stack([np.ones_like(times), np.log(times), -times], axis=1)
    else:
        raise ValueError(f"unknown fit model {model!r}")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ValueError("degenerate design matrix")
    beta, _, rank, _ = np.linalg.lstsq(X, logv, rcond=None)
    if rank < X.shape[1]:
        raise ValueError("degenerate design matrix")
    fitted = X @ beta
    ss_res = float(np.sum((logv - fitted) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else max(0.0, 1.0 - ss_res / ss_tot)
    if model == "EXP":
        poly, rate = 0.0, float(beta[1])
    else:
        poly, rate = float(beta[1]), float(beta[2])
    return DecayFit(
        rate=rate,
        poly_order=poly,
        prefactor=float(np.exp(beta[0])),
        window=(float(times.min()), float(times.max())),
        r_squared=r2,
        model=model,
    )


def upper_envelope(times, values):
    """Local-maxima subsequence of an oscillating series (fallback: all points)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    peaks, _ = find_peaks(values)
    if peaks.size >= 8:
        return times[peaks], values[peaks]
    return times, values


def _window_mask(times, values, t_lo: float = 0.5, tail_frac: float = 0.1):
    """Default fit window: drop the early transient and the floor-prone tail."""
    times = np.asarray(times, dtype=float)
    t_hi = times.max() - tail_frac * (times.max() - times.min())
    mask = (times >= t_lo) & (times <= t_hi) & (values > 0.0)
    vmax = float(np.max(values)) if np.any(values > 0) else 1.0
    mask &= values > 1e-13 * vmax
    return mask


def _envelope_fit(times, values, model: str, floor_rel: float = 1e-13) -> DecayFit:
    """Fit after masking the noise floor and, if oscillatory, taking peaks."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    vmax = max(float(values.max()), 1e-300)
    mask = (times > 0.0) & (values > floor_rel * vmax)
    t, v = upper_envelope(times[mask], values[mask])
    return fit_decay(t, v, model)


# ---------------------------------------------------------------------------
# acceptance bookkeeping

@dataclass
class CheckResult:
    check_id: str
    label: str
    passed: bool | None
    detail: str
    measured: dict = dc_field(default_factory=dict)
    bound: str = ""
    tolerance: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return f"{self.check_id} {self.status} ({self.detail})"

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "label": self.label,
            "status": self.status,
            "detail": self.detail,
            "measured": _jsonable(self.measured),
            "bound": self.bound,
            "tolerance": self.tolerance,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# quadrature oracles (independent reference paths for the chain machinery)

def fd_kernel_reference(xi, xs, gamma: float, step: float = 1e-3) -> float:
    """Kernel value rebuilt from the matrix field by finite differences.

    Uses bracket = xi^T Phi(eta) xs - tr Phi(eta) - div div Phi(eta), with the
    double divergence taken by Richardson-extrapolated central differences, so
    the closed-form scalar terms of the kernel are checked independently.
    """
    xi = np.asarray(xi, dtype=float)
    xs = np.asarray(xs, dtype=float)
    eta = xi - xs
    r = float(np.linalg.norm(eta))
    if r == 0.0:
        raise ValueError("reference kernel requires distinct points")
    h = step * max(1.0, r)

    def divdiv(hh: float) -> float:
        tot = 0.0
        for i in range(3):
            ei = np.zeros(3)
            ei[i] = hh
            for j in range(3):
                if i == j:
                    tot += (
                        phi_matrix(eta + ei, gamma)[i, i]
                        - 2.0 * phi_matrix(eta, gamma)[i, i]
                        + phi_matrix(eta - ei, gamma)[i, i]
                    ) / hh**2
                else:
                    ej = np.zeros(3)
                    ej[j] = hh
                    tot += (
                        phi_matrix(eta + ei + ej, gamma)[i, j]
                        - phi_matrix(eta + ei - ej, gamma)[i, j]
                        - phi_matrix(eta - ei + ej, gamma)[i, j]
                        + phi_matrix(eta - ei - ej, gamma)[i, j]
                    ) / (4.0 * hh**2)
        return tot

    dd = (4.0 * divdiv(0.5 * h) - divdiv(h)) / 3.0
    phi = phi_matrix(eta, gamma)
    bracket = float(xi @ phi @ xs) - float(np.trace(phi)) - dd
    log_mm = -0.25 * (float(xi @ xi) + float(xs @ xs)) - 1.5 * np.log(2.0 * np.pi)
    return float(np.exp(log_mm) * bracket)


def _eig_propagator(A: np.ndarray):
    """Eigendecomposition used to apply e^{tau A} at arbitrary tau.

    The conjugated per-mode generators are diagonalizable with well
    conditioned eigenvectors on small grids, which is where the oracles run.
    """
    w, V = sla.eig(A)
    return w, V, sla.inv(V)


def _log_simpson(t: float, panels: int, sig_min_rel: float = 1e-9):
    """Simpson nodes/weights for int_0^t f(sig) dsig after sig = e^y.

    The returned weights absorb the Jacobian, so sum(w * f(sig)) covers
    [sig_min_rel * t, t]; the remaining sliver at 0 is handled by the caller.
    """
    if panels % 2:
        panels += 1
    ys = np.linspace(np.log(sig_min_rel * t), np.log(t), panels + 1)
    wts = np.full(panels + 1, 2.0)
    wts[1::2] = 4.0
    wts[0] = wts[-1] = 1.0
    wts *= (ys[-1] - ys[0]) / panels / 3.0
    sig = np.exp(ys)
    return sig, wts * sig


def duhamel_oracle(ops, k, u0: np.ndarray, t: float, panels: int = 512) -> np.ndarray:
    """Quadrature evaluation of int_0^t S^{t-s} K_r O^s u0 ds.

    The integrand has a boundary layer at s = t: K_r puts O(1) content on
    the stiff directions of the conjugated generator, which the inner
    semigroup factor has only damped for t - s >> 1/|spectrum|.  A uniform
    rule therefore converges at first order, so the Simpson mesh is graded
    geometrically into the layer (log substitution in sigma = t - s) and the
    sliver below the smallest node is integrated exactly in the eigenbasis
    of the inner generator.
    """
    gens = chain_generators(ops, k)
    k_reg = (ops.k_mod - ops.k_singular).astype(complex)
    w_in, V_in, Vi_in = _eig_propagator(gens["inner"])
    w_out, V_out, Vi_out = _eig_propagator(gens["outer"])
    sig, wq = _log_simpson(t, panels)

    U = Vi_out @ np.asarray(u0, dtype=complex)
    orbit = V_out @ (np.exp(np.outer(w_out, t - sig)) * U[:, None])
    G = Vi_in @ (k_reg @ orbit)
    acc = (V_in @ (np.exp(np.outer(w_in, sig)) * G)) @ wq

    # exact eigenbasis integral of the frozen integrand over [0, sig_min]
    g0 = Vi_in @ (k_reg @ (V_out @ (np.exp(w_out * t) * U)))
    phi = np.where(np.abs(w_in) > 1e-12, np.expm1(w_in * sig[0]) / w_in, sig[0])
    return acc + V_in @ (phi * g0)


def mixture_oracle(
    ops, k, f0: np.ndarray, t: float, panels_outer: int = 512, panels_inner: int = 320
) -> np.ndarray:
    """Nested-quadrature evaluation of the order-1 iterated integral
    int_0^t ds1 S^{t-s1} K int_0^{s1} ds2 S^{s1-s2} K S^{s2} f0.

    Both time integrals carry the same endpoint layer as the Duhamel
    integral (at s1 = t and s2 = s1), so each level uses the graded Simpson
    mesh from _log_simpson with an exact eigenbasis sliver correction, and
    all semigroup factors are applied through the eigendecomposition of the
    inner generator.
    """
    gens = chain_generators(ops, k)
    K = ops.k_mod.astype(complex)
    w, V, Vi = _eig_propagator(gens["inner"])
    f0 = np.asarray(f0, dtype=complex)
    F = Vi @ f0

    def phi_sliver(sig0: float) -> np.ndarray:
        return np.where(np.abs(w) > 1e-12, np.expm1(w * sig0) / w, sig0)

    def inner_integral(s1: float) -> np.ndarray:
        if s1 <= 0.0:
            return np.zeros_like(f0)
        sig2, wq2 = _log_simpson(s1, panels_inner)
        X = V @ (np.exp(np.outer(w, s1 - sig2)) * F[:, None])
        G = Vi @ (K @ X)
        acc = (V @ (np.exp(np.outer(w, sig2)) * G)) @ wq2
        g0 = Vi @ (K @ (V @ (np.exp(w * s1) * F)))
        return acc + V @ (phi_sliver(sig2[0]) * g0)

    sig1, wq1 = _log_simpson(t, panels_outer)
    inner_mat = np.stack([inner_integral(t - s) for s in sig1], axis=1)
    G1 = Vi @ (K @ inner_mat)
    acc = (V @ (np.exp(np.outer(w, sig1)) * G1)) @ wq1
    g0 = Vi @ (K @ inner_integral(t))
    return acc + V @ (phi_sliver(sig1[0]) * g0)


# ---------------------------------------------------------------------------
# acceptance checks A1..A11

def check_a1_structure(ops) -> CheckResult:
    L = ops.l_full
    sym = float(np.linalg.norm(L - L.T) / np.linalg.norm(L))
    vals = np.linalg.eigvalsh(L)
    vmax = float(vals[-1])
    near = np.abs(vals[-5:])
    sixth = abs(float(vals[-6]))
    cluster = float(near.max())
    ratio = sixth / max(cluster, 1e-300)
    ok = sym <= 1e-12 and vmax <= 1e-8 and ratio >= 10.0
    return CheckResult(
        "A1",
        "operator structure",
        ok,
        f"gamma={ops.gamma:g}: sym {sym:.2e}, max eig {vmax:.2e}, "
        f"cluster/6th ratio {ratio:.1f}x",
        {"symmetry": sym, "max_eig": vmax, "cluster_gap_ratio": ratio},
        bound="sym<=1e-12, eigs<=1e-8, >=10x gap",
        tolerance="1e-12 / 1e-8 / 10x",
    )


def check_a2_coercivity(ops, trials: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    B = ops.coercivity_matrix
    A = -ops.lambda_mod
    violations = 0
    worst = np.inf
    for _ in range(trials):
        f = rng.standard_normal(ops.grid.size)
        lhs = float(f @ A @ f)
        rhs = float(f @ B @ f)
        margin = lhs - ops.c0_hat * rhs
        worst = min(worst, margin / max(rhs, 1e-300))
        if margin < -1e-10 * max(rhs, 1.0):
            violations += 1
    ok = ops.c0_hat > 0.0 and violations == 0
    return CheckResult(
        "A2",
        "coercivity",
        ok,
        f"gamma={ops.gamma:g}: c0_hat {ops.c0_hat:.4f}, {violations}/{trials} "
        f"violations, worst margin {worst:.2e}",
        {"c0_hat": ops.c0_hat, "violations": violations, "worst_margin": worst},
        bound="c0_hat>0, zero violations",
        tolerance="-1e-10 slack",
    )


def check_a3_kernel(ops, pairs: int = 50, seed: int = 1) -> CheckResult:
    gamma = ops.gamma
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < pairs:
        xi = rng.uniform(-2.5, 2.5, size=3)
        xs = rng.uniform(-2.5, 2.5, size=3)
        if np.linalg.norm(xi - xs) < 0.3:
            continue
        ref = fd_kernel_reference(xi, xs, gamma)
        val = ktilde_kernel(xi, xs, gamma)
        worst = max(worst, abs(val - ref) / max(abs(ref), 1e-300))
        done += 1
    K = ops.k_tilde
    asym = float(np.linalg.norm(K - K.T) / max(np.linalg.norm(K), 1e-300))
    ok = worst <= 1e-5 and asym <= 1e-10
    return CheckResult(
        "A3",
        "kernel formula",
        ok,
        f"gamma={gamma:g}: worst kernel rel err {worst:.2e} over {pairs} pairs, "
        f"K asymmetry {asym:.2e}",
        {"worst_rel_err": worst, "k_asymmetry": asym},
        bound="rel err<=1e-5, asym<=1e-10",
        tolerance="1e-5 / 1e-10",
    )


def _dispersion_error(fit) -> float:
    oracle = euler_moment_oracle((1.0, 0.0, 0.0))
    a1 = np.sort(np.asarray(fit.a1))
    scale = float(np.max(np.abs(oracle)))
    return float(np.max(np.abs(a1 - oracle)) / scale)


def check_a4_dispersion(fit_coarse, fit_fine=None) -> CheckResult:
    err_c = _dispersion_error(fit_coarse)
    if fit_fine is None:
        return CheckResult(
            "A4",
            "dispersion branches",
            None,
            f"slow-only: coarse-grid a1 err {err_c:.3%} (fine grid not run)",
            {"a1_err_coarse": err_c},
            bound="fine a1 within 3%, a2>0, coarse->fine improvement",
            tolerance="3%",
        )
    err_f = _dispersion_error(fit_fine)
    a2 = np.asarray(fit_fine.a2)
    ok = err_f <= 0.03 and bool(np.all(a2 > 0.0)) and err_f < err_c
    return CheckResult(
        "A4",
        "dispersion branches",
        ok,
        f"a1 err {err_f:.3%} (fine) vs {err_c:.3%} (coarse), "
        f"min a2 {a2.min():.4f}",
        {"a1_err_fine": err_f, "a1_err_coarse": err_c, "a2": a2},
        bound="fine a1 within 3% of wave speeds, a2>0, improvement",
        tolerance="3%",
    )


def check_a5_gap_decay(gap: GapEstimate, times, short_series, perp_series) -> CheckResult:
    results = {}
    ok = gap.tau_hat > 0.0
    detail = [f"tau_hat {gap.tau_hat:.4f}"]
    for name, series in (("short", short_series), ("long_perp", perp_series)):
        series = np.asarray(series, dtype=float)
        mask = _window_mask(times, series)
        fit = fit_decay(np.asarray(times)[mask], series[mask], "EXP")
        results[name] = {"rate": fit.rate, "r2": fit.r_squared}
        good = fit.rate >= 0.5 * gap.tau_hat and fit.r_squared >= 0.95
        ok = ok and good
        detail.append(f"{name} rate {fit.rate:.4f} (r2 {fit.r_squared:.3f})")
    return CheckResult(
        "A5",
        "spectral gap decay",
        ok,
        ", ".join(detail) + f", need >= {0.5 * gap.tau_hat:.4f}",
        {"tau_hat": gap.tau_hat, **results},
        bound="rates >= 0.5 tau_hat",
        tolerance="r2 >= 0.95",
    )


def chain_level_fits(chain: PicardChain, s: int = 0) -> dict:
    """Per-level POLY_EXP fits restricted to the growth-and-turnover phase.

    The algebraic order t^{j+1} of a forced level is only identifiable
    while the Duhamel memory is still building up; past a few peak times
    every level relaxes onto a common exponential with constant ratios,
    which carries no order information.  The window therefore runs from
    the first positive sample to four times the latest level peak.
    """
    peak_t = 0.0
    for j in chain.levels:
        series = chain.norm(j, s)
        if series.max() > 0.0:
            peak_t = max(peak_t, float(chain.times[int(np.argmax(series))]))
    t_hi = 4.0 * max(peak_t, 1e-3)
    fits = {}
    for j in chain.levels:
        series = chain.norm(j, s)
        mask = (
            (chain.times > 0.0)
            & (chain.times <= t_hi)
            & (series > 1e-13 * max(series.max(), 1e-300))
        )
        if mask.sum() < 8:
            continue
        fits[j] = fit_decay(chain.times[mask], series[mask], "POLY_EXP")
    return fits


def check_a6_chain(chain: PicardChain, c0_hat: float, duhamel_rel: float) -> CheckResult:
    fits = chain_level_fits(chain, s=0)
    ok = duhamel_rel <= 1e-4
    rows = []
    measured = {"duhamel_rel": duhamel_rel}
    for j in range(-1, 4):
        fit = fits.get(j)
        if fit is None:
            ok = False
            rows.append(f"j={j}: no fit")
            continue
        good = abs(fit.poly_order - (j + 1)) <= 0.5 and fit.rate >= 0.4 * c0_hat
        ok = ok and good
        rows.append(f"j={j}: p {fit.poly_order:+.2f}, r {fit.rate:.3f}")
        measured[f"j{j}"] = {"poly_order": fit.poly_order, "rate": fit.rate}
    return CheckResult(
        "A6",
        "expansion chain bounds",
        ok,
        "; ".join(rows) + f"; duhamel {duhamel_rel:.2e}; need p=j+1+-0.5, "
        f"r>={0.4 * c0_hat:.3f}",
        measured,
        bound="poly j+1 +-0.5, rate >= 0.4 c0, duhamel 1e-4",
        tolerance="0.5 / 0.4c0 / 1e-4",
    )


def check_a7_mixture(
    oracle_rel: float, times, envelope_series, j2_fit=None, slow: bool = False
) -> CheckResult:
    fit = _envelope_fit(times, envelope_series, "POLY_EXP")
    ok = oracle_rel <= 1e-4 and fit.rate > 0.0 and np.isfinite(fit.prefactor)
    detail = (
        f"oracle rel {oracle_rel:.2e}, envelope p {fit.poly_order:+.2f} "
        f"r {fit.rate:.3f}"
    )
    measured = {
        "oracle_rel": oracle_rel,
        "poly_order": fit.poly_order,
        "rate": fit.rate,
    }
    if slow:
        if j2_fit is None:
            ok = False
            detail += "; j=2 fit missing"
        else:
            good = abs(j2_fit.poly_order - 2.0) <= 0.7
            ok = ok and good
            detail += f"; j=2 p {j2_fit.poly_order:+.2f}"
            measured["j2_poly_order"] = j2_fit.poly_order
    else:
        detail += "; j=2 gated behind slow"
    return CheckResult(
        "A7",
        "mixture operator",
        ok,
        detail,
        measured,
        bound="oracle 1e-4, r>0, j2 order 2+-0.7 (slow)",
        tolerance="1e-4 / 0.7",
    )


def check_a8_scaling(scans: dict) -> CheckResult:
    ok = True
    rows = []
    measured = {}
    for gamma, scan in sorted(scans.items()):
        target = gamma + 2.0
        good = abs(scan.slope - target) <= 0.3
        ok = ok and good
        rows.append(f"gamma={gamma:g}: slope {scan.slope:.3f} (target {target:g})")
        measured[f"gamma_{gamma:g}"] = scan.slope
    return CheckResult(
        "A8",
        "cutoff operator scaling",
        ok,
        "; ".join(rows),
        measured,
        bound="slope = gamma+2 +- 0.3",
        tolerance="0.3",
    )


def check_a9_regimes(regime_data: dict) -> CheckResult:
    """Combine the three regime measurements into one verdict.

    regime_data keys: "I" -> max fluid norm; "II" -> {"eps": [...], "rates":
    [...]}; "III" -> {"poly_order": p, "mode_sum_dev": d}.
    """
    ok = True
    parts = []
    one = regime_data["I"]
    good = one <= 1e-14
    ok &= good
    parts.append(f"I: max fluid {one:.2e}")

    two = regime_data["II"]
    eps = np.asarray(two["eps"], dtype=float)
    rates = np.asarray(two["rates"], dtype=float)
    ratio = rates[1] / rates[0]
    target = (eps[1] / eps[0]) ** 2
    ratio_ok = abs(ratio - target) <= 0.4 * target
    C = float(np.sum(rates * eps**2) / np.sum(eps**4))
    band_ok = bool(np.all((rates >= 0.3 * C * eps**2) & (rates <= 3.0 * C * eps**2)))
    ok &= ratio_ok and band_ok
    parts.append(
        f"II: rate ratio {ratio:.2f} vs eps^2 ratio {target:.2f}, band "
        f"{'ok' if band_ok else 'out'}"
    )

    three = regime_data["III"]
    p = three["poly_order"]
    dev = three["mode_sum_dev"]
    p_ok = abs(-p - 1.5) <= 0.3
    sum_ok = dev <= 0.05
    ok &= p_ok and sum_ok
    parts.append(f"III: amplitude exponent {-p:.2f}, mode-sum dev {dev:.2%}")

    return CheckResult(
        "A9",
        "long-wave regimes",
        bool(ok),
        "; ".join(parts),
        _jsonable(regime_data),
        bound="I<=1e-14; II ratio 40%, band [0.3,3]C eps^2; III 1.5+-0.3, 5%",
        tolerance="see bound",
    )


def check_a10_decomposition(
    recon_rel: float, r0_norm: float, reint_rel: float, gr_fit: DecayFit, c0: float, tau: float
) -> CheckResult:
    floor = 0.4 * min(c0, tau)
    ok = (
        recon_rel <= 1e-10
        and r0_norm <= 1e-12
        and reint_rel <= 1e-6
        and gr_fit.rate >= floor
    )
    return CheckResult(
        "A10",
        "decomposition identities",
        ok,
        f"bucket recon {recon_rel:.2e}, R(0) {r0_norm:.2e}, re-integration "
        f"{reint_rel:.2e}, G_R rate {gr_fit.rate:.3f} (need >= {floor:.3f})",
        {
            "recon_rel": recon_rel,
            "r0_norm": r0_norm,
            "reint_rel": reint_rel,
            "gr_rate": gr_fit.rate,
        },
        bound="1e-10 / 1e-6 / rate >= 0.4 min(c0,tau)",
        tolerance="1e-10 / 1e-6",
    )


def check_a11_commutation(report, damped) -> CheckResult:
    slopes = np.asarray(report.slopes, dtype=float)
    slopes = slopes[np.isfinite(slopes)]
    mean_slope = float(np.mean(slopes))
    slope_ok = abs(mean_slope - 2.0) <= 0.4

    res = np.asarray(damped.residuals, dtype=float)
    peak = int(np.argmax(res))
    fit = _envelope_fit(np.asarray(damped.times)[peak:], res[peak:], "EXP")
    damp_ok = fit.rate > 0.0 and np.isfinite(fit.prefactor)

    ok = slope_ok and damp_ok
    return CheckResult(
        "A11",
        "commutation diagnostics",
        ok,
        f"transport slope {mean_slope:.2f} (target 2), damped rate {fit.rate:.3f} "
        f"C {fit.prefactor:.3g}",
        {"mean_slope": mean_slope, "damped_rate": fit.rate, "damped_C": fit.prefactor},
        bound="slope 2+-0.4, damped C finite r>0",
        tolerance="0.4",
    )


# ---------------------------------------------------------------------------
# artifact writers

def write_csv(path, header, rows) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(c) for c in row])


def _csv_cell(c):
    if isinstance(c, (np.floating, float)):
        return repr(float(c))
    if isinstance(c, (np.integer, int)):
        return int(c)
    return c


def export_matrix(path, matrix: np.ndarray) -> None:
    """Row-major float64 dump with a 16-byte little-endian dimension header."""
    m = np.ascontiguousarray(matrix, dtype="<f8")
    with Path(path).open("wb") as f:
        f.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        f.write(m.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    with Path(path).open("rb") as f:
        rows, cols = struct.unpack("<QQ", f.read(16))
        data = np.frombuffer(f.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError("matrix file size does not match its header")
    return data.reshape(rows, cols).copy()


def write_json(path, payload) -> None:
    with Path(path).open("w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# configuration

DEFAULT_CONFIG = {
    "n": 9,
    "n_slow": 15,
    "radius": 4.5,
    "gammas": [0.0, -1.0],
    "epsilon": 0.5,
    "nu0": 1.0,
    "cutoff_d": 0.5,
    "k_max": 8,
    "seed": 0,
    "kappa_max": 2.0,
    "kappa_step": 0.05,
    "profile": "cosine_mode_poly",
    "width_fraction": 0.25,
    "delta_override": None,
    "scan_n": 21,
}


class ConfigError(ValueError):
    """Raised for malformed configuration input (CLI exit code 2)."""


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {**DEFAULT_CONFIG, **cfg}
    for key in ("n", "n_slow", "k_max", "seed", "scan_n"):
        if not isinstance(merged[key], int) or isinstance(merged[key], bool):
            raise ConfigError(f"config key {key!r} must be an integer")
    for key in ("radius", "epsilon", "nu0", "cutoff_d", "kappa_max", "kappa_step",
                "width_fraction"):
        if not isinstance(merged[key], (int, float)) or isinstance(merged[key], bool):
            raise ConfigError(f"config key {key!r} must be a number")
        merged[key] = float(merged[key])
    if not isinstance(merged["gammas"], list) or not merged["gammas"]:
        raise ConfigError("config key 'gammas' must be a nonempty list")
    merged["gammas"] = [float(g) for g in merged["gammas"]]
    if merged["delta_override"] is not None:
        merged["delta_override"] = float(merged["delta_override"])
    if not isinstance(merged["profile"], str):
        raise ConfigError("config key 'profile' must be a string")
    try:
        GridSpec(
            n_per_axis=merged["n"],
            radius=merged["radius"],
            gamma=merged["gammas"][0],
            epsilon=merged["epsilon"],
            cutoff_d=merged["cutoff_d"],
            nu0=merged["nu0"],
            k_max=merged["k_max"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return merged


def load_config(path) -> dict:
    try:
        with Path(path).open() as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return validate_config(raw)


# ---------------------------------------------------------------------------
# suite runner

_STAGES = ("assemble", "gap", "branches", "chain", "green", "fits")


@dataclass
class RunReport:
    config: dict
    checks: list
    summaries: dict
    timing: dict
    stages_done: list

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "config": _jsonable(self.config),
            "checks": [c.to_dict() for c in self.checks],
            "summaries": _jsonable(self.summaries),
            "stages_done": list(self.stages_done),
            "passed": self.passed,
            "timing": {k: round(v, 3) for k, v in self.timing.items()},
        }


def _gamma_tag(gamma: float) -> str:
    return ("m" if gamma < 0 else "p") + f"{abs(gamma):.2f}".replace(".", "_")


def _spec_for(cfg: dict, gamma: float, n: int | None = None) -> GridSpec:
    return GridSpec(
        n_per_axis=cfg["n"] if n is None else n,
        radius=cfg["radius"],
        gamma=gamma,
        epsilon=cfg["epsilon"],
        cutoff_d=cfg["cutoff_d"],
        nu0=cfg["nu0"],
        k_max=cfg["k_max"],
    )


def _branch_kappas(step: float = 0.02, hi: float = 0.26) -> np.ndarray:
    return np.round(np.arange(0.0, hi + 1e-9, step), 10)


def run_suite(
    config,
    out_dir,
    fast: bool = True,
    slow: bool = False,
    stages=None,
) -> RunReport:
    """Execute the staged pipeline, write artifacts, evaluate the checks."""
    if isinstance(config, (str, Path)):
        cfg = load_config(config)
    else:
        cfg = validate_config(dict(config))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "MANIFEST"
    manifest.write_text("")

    wanted = list(_STAGES if stages is None else stages)
    for st in wanted:
        if st not in _STAGES:
            raise ConfigError(f"unknown stage {st!r}")

    checks: list = []
    summaries: dict = {}
    timing: dict = {}
    done: list = []
    ctx: dict = {"cfg": cfg, "out": out, "slow": slow, "checks": checks,
                 "summaries": summaries}

    stage_fns = {
        "assemble": _stage_assemble,
        "gap": _stage_gap,
        "branches": _stage_branches,
        "chain": _stage_chain,
        "green": _stage_green,
        "fits": _stage_fits,
    }
    name = "(none)"
    try:
        for name in _STAGES:
            if name not in wanted:
                continue
            t0 = time.perf_counter()
            stage_fns[name](ctx)
            timing[name] = time.perf_counter() - t0
            done.append(name)
            manifest.write_text("".join(s + "\n" for s in done))
    except Exception as exc:  # noqa: BLE001 - partial artifacts are the contract
        checks.append(
            CheckResult(
                "STAGE",
                f"stage {name}",
                False,
                f"stage {name} raised {type(exc).__name__}: {exc}",
            )
        )
        raise
    finally:
        report = RunReport(
            config=cfg, checks=checks, summaries=summaries, timing=timing,
            stages_done=done,
        )
        # timing lives under its own key so consumers can strip it when
        # comparing reports byte for byte
        write_json(out / "report.json", report.to_dict())
    return report


def _stage_assemble(ctx: dict) -> None:
    cfg, out = ctx["cfg"], ctx["out"]
    ops_by_gamma = {}
    for gamma in cfg["gammas"]:
        spec = _spec_for(cfg, gamma)
        ops = assemble_collision(build_grid(spec))
        ops_by_gamma[gamma] = ops
        tag = _gamma_tag(gamma)
        export_matrix(out / f"operator_{tag}.bin", ops.l_full)
        write_json(
            out / f"operator_{tag}.json",
            {
                "gamma": gamma,
                "radius": spec.radius,
                "n_per_axis": spec.n_per_axis,
                "nu0": ops.nu0,
                "cutoff_d": spec.cutoff_d,
                "c0_hat": ops.c0_hat,
                "conservation_fix_norm": ops.conservation_fix_norm,
            },
        )
        prof = ops.profile
        write_csv(
            out / f"profile_{tag}.csv",
            ["r", "lambda1", "lambda2"],
            zip(prof.radii, prof.lambda1, prof.lambda2),
        )
        ctx["checks"].append(check_a1_structure(ops))
        ctx["checks"].append(check_a3_kernel(ops, seed=cfg["seed"] + 1))
    ctx["checks"].append(check_a2_coercivity(ops_by_gamma[cfg["gammas"][0]],
                                             seed=cfg["seed"]))
    ctx["ops"] = ops_by_gamma
    ctx["summaries"]["assemble"] = {
        str(g): {"c0_hat": o.c0_hat, "nu0": o.nu0}
        for g, o in ops_by_gamma.items()
    }


def _stage_gap(ctx: dict) -> None:
    cfg, out = ctx["cfg"], ctx["out"]
    ops = ctx["ops"][cfg["gammas"][0]]
    gap = estimate_gap(ops, kappa_max=cfg["kappa_max"], step=cfg["kappa_step"])
    if cfg["delta_override"] is not None:
        gap = replace(gap, delta_hat=cfg["delta_override"])
    ctx["gap"] = gap
    vals = np.linalg.eigvalsh(ops.l_full)
    write_csv(
        out / "spectrum.csv",
        ["kappa", "re", "im"],
        [(0.0, float(v), 0.0) for v in vals],
    )
    write_json(
        out / "gap.json",
        {
            "tau_hat": gap.tau_hat,
            "delta_hat": gap.delta_hat,
            "kappa_star": gap.kappa_star,
            "khat": gap.khat,
            "kappa_grid": gap.kappa_grid,
            "max_real_parts": gap.max_real_parts,
            "counts_above": gap.counts_above,
            "saturated": gap.saturated,
        },
    )
    ctx["summaries"]["gap"] = {
        "tau_hat": gap.tau_hat,
        "delta_hat": gap.delta_hat,
        "kappa_star": gap.kappa_star,
    }


def _stage_branches(ctx: dict) -> None:
    cfg, out = ctx["cfg"], ctx["out"]
    ops = ctx["ops"][cfg["gammas"][0]]
    khat = np.array([1.0, 0.0, 0.0])
    kappas = _branch_kappas()
    branches = trace_branches(ops, khat, kappas)
    fit = fit_dispersion(branches)
    ctx["branch_fit"] = fit
    rows = []
    for ki, kappa in enumerate(branches.kappas):
        for j in range(5):
            overlap = 1.0 if ki == 0 else float(branches.overlaps[ki - 1, j])
            rows.append(
                (
                    float(kappa),
                    j,
                    float(branches.sigma[j, ki].real),
                    float(branches.sigma[j, ki].imag),
                    overlap,
                )
            )
    write_csv(out / "branches.csv", ["kappa", "j", "re_sigma", "im_sigma", "overlap"], rows)
    write_json(
        out / "dispersion_fit.json",
        {
            "a1": fit.a1,
            "a2": fit.a2,
            "fit_residual": fit.fit_residual,
            "kappa_window": fit.kappa_window,
            "oracle_a1": sorted(euler_moment_oracle((1.0, 0.0, 0.0))),
        },
    )

    fit_fine = None
    if ctx["slow"]:
        spec15 = _spec_for(cfg, cfg["gammas"][0], n=cfg["n_slow"])
        ops15 = assemble_collision(build_grid(spec15))
        branches15 = trace_branches(ops15, khat, kappas)
        fit_fine = fit_dispersion(branches15)
        del ops15
    ctx["checks"].append(check_a4_dispersion(fit, fit_fine))
    ctx["summaries"]["branches"] = {
        "a1": fit.a1,
        "a2": fit.a2,
        "fine": None if fit_fine is None else {"a1": fit_fine.a1, "a2": fit_fine.a2},
    }


def _chain_times(c0: float) -> np.ndarray:
    """Output grid: geometric spacing resolves the early growth phase of the
    forced levels (where the algebraic orders live) at no extra stepping
    cost, then stretches to the exponential tail."""
    t_max = float(min(60.0, max(12.0, 5.0 / max(c0, 1e-3))))
    return np.concatenate([[0.0], np.geomspace(0.05, t_max, 90)])


def _stage_chain(ctx: dict) -> None:
    cfg, out = ctx["cfg"], ctx["out"]
    gamma0 = cfg["gammas"][0]
    ops = ctx["ops"][gamma0]
    field = prepare_initial(
        {"profile": cfg["profile"], "width_fraction": cfg["width_fraction"]},
        ops.grid,
        cfg["epsilon"],
    )
    times = _chain_times(ops.c0_hat)
    chain = picard_chain(field, ops, j_max=4, times=times, with_remainder=True)
    ctx["field"] = field
    ctx["chain"] = chain

    # independent n=5 operators for the quadrature oracles; smooth data keeps
    # the stiff far-tail directions of the conjugated form unexcited
    spec5 = _spec_for(cfg, gamma0, n=5)
    ops5 = assemble_collision(build_grid(spec5))
    pts5 = ops5.grid.points
    u0 = (
        ops5.grid.sqrt_maxwellian
        * ops5.grid.sqrt_weights
        * (1.0 + 0.2 * pts5[:, 0] + 0.1 * pts5[:, 1] * pts5[:, 2])
    )
    kvec = (1, 0, 0)
    t_ref = 1.5
    probe_times = np.linspace(0.0, t_ref, 7)
    f5 = ModeField(
        grid=ops5.grid, epsilon=cfg["epsilon"], base=u0, scalars={kvec: 1.0}
    )
    chain5 = picard_chain(f5, ops5, j_max=0, times=probe_times, s_orders=(0,))
    got = chain5.trajectories[0][kvec][-1]
    want = duhamel_oracle(ops5, kvec, u0.astype(complex), t_ref)
    duh_rel = float(np.linalg.norm(got - want) / np.linalg.norm(u0))
    ctx["checks"].append(check_a6_chain(chain, ops.c0_hat, duh_rel))

    mix_t = 1.0
    mix5 = mixture_apply(u0.astype(complex), 1, ops5, kvec, np.linspace(0.0, mix_t, 5))
    mix_ref = mixture_oracle(ops5, kvec, u0.astype(complex), mix_t)
    mix_rel = float(np.linalg.norm(mix5.states[-1] - mix_ref) / np.linalg.norm(u0))

    f0_9 = ops.grid.sqrt_maxwellian * ops.grid.sqrt_weights
    f0_9 = f0_9 * (1.0 + 0.2 * ops.grid.points[:, 0])
    mix_times = np.linspace(0.0, min(times[-1], 14.0), 57)
    mix9 = mixture_apply(f0_9.astype(complex), 1, ops, kvec, mix_times)
    be = PHASE_BETA * cfg["epsilon"]
    env = be * np.linalg.norm(mix9.states, axis=1)

    j2_fit = None
    if ctx["slow"]:
        mix9b = mixture_apply(f0_9.astype(complex), 2, ops, kvec, mix_times)
        env2 = (be**2) * np.linalg.norm(mix9b.states, axis=1)
        # same full-horizon envelope estimator as the first-order curve; the
        # short-time simplex order is 2j by construction, and restricting the
        # fit to the growth phase would report that instead of the envelope
        j2_fit = _envelope_fit(mix_times, env2, "POLY_EXP")
    ctx["checks"].append(
        check_a7_mixture(mix_rel, mix_times, env, j2_fit, ctx["slow"])
    )

    fits = chain_level_fits(chain, s=0)
    rows = []
    for j in chain.levels:
        series = chain.norm(j, 0)
        fit = fits.get(j)
        for t, v in zip(chain.times, series):
            rows.append(
                (
                    float(t),
                    j,
                    float(v),
                    float("nan") if fit is None else fit.poly_order,
                    float("nan") if fit is None else fit.rate,
                )
            )
    write_csv(out / "chain.csv", ["t", "j", "norm", "fitted_order", "fitted_rate"], rows)
    ctx["ops5"] = ops5
    ctx["summaries"]["chain"] = {
        "duhamel_rel": duh_rel,
        "mixture_rel": mix_rel,
        "t_max": float(times[-1]),
    }


def _stage_green(ctx: dict) -> None:
    cfg, out = ctx["cfg"], ctx["out"]
    ops = ctx["ops"][cfg["gammas"][0]]
    gap = ctx["gap"]
    chain = ctx["chain"]
    field = ctx["field"]

    snaps, per_mode = green_snapshot_series(
        field, ops, gap, chain.times, keep_modes=True
    )
    _attach_chain_buckets(snaps, per_mode, chain, field)
    recon_rel = _projection_recon(ops, gap, field.epsilon, per_mode)
    rows = []
    for snap in snaps:
        for s in (0, 2):
            rows.append(
                (
                    snap.t,
                    s,
                    snap.norm_total[s],
                    snap.norm_short[s],
                    snap.norm_long_perp[s],
                    snap.norm_fluid[s],
                    snap.norm_kinetic[s],
                    snap.norm_remainder[s],
                    snap.regime_tag,
                )
            )
    write_csv(
        out / "snapshots.csv",
        ["t", "s", "total", "short", "long_perp", "fluid", "kinetic", "remainder",
         "regime"],
        rows,
    )

    # decay-split fits on pure single-mode data: a long mode carries the
    # branch complement, and a mode past the measured branch exit carries the
    # genuinely short-wave decay.  The bounded kappa scan behind delta_hat
    # only lower-bounds that exit, so it is probed on the dispersion curve.
    eps_long = 0.9 * gap.delta_hat
    f_long = prepare_initial({"profile": "cosine_mode_poly"}, ops.grid, eps_long)
    t5 = np.linspace(0.0, max(8.0, 4.0 / gap.tau_hat), 49)
    snaps_l, per_l = green_snapshot_series(
        f_long, ops, gap, t5, s_orders=(0,), keep_modes=True
    )
    recon_rel = max(recon_rel, _projection_recon(ops, gap, eps_long, per_l))
    ctx["recon_rel"] = recon_rel

    eps_short = deep_short_kappa(ops, gap) / PHASE_BETA
    f_short = prepare_initial({"profile": "cosine_mode_poly"}, ops.grid, eps_short)
    snaps_s, _ = green_snapshot_series(
        f_short, ops, gap, t5, s_orders=(0,), keep_modes=True
    )
    short5 = np.array([s.norm_short[0] for s in snaps_s])
    perp5 = np.array([s.norm_long_perp[0] for s in snaps_l])
    ctx["checks"].append(check_a5_gap_decay(gap, t5, short5, perp5))
    write_csv(
        out / "gap_series.csv",
        ["t", "short", "long_perp"],
        zip(t5, short5, perp5),
    )
    ctx["summaries"]["green"] = {
        "recon_rel": recon_rel,
        "decay_epsilon_long": eps_long,
        "decay_epsilon_short": eps_short,
        "regime": snaps[0].regime_tag,
    }
    ctx["snapshots"] = snaps


def _attach_chain_buckets(snaps, per_mode, chain: PicardChain, field: ModeField):
    """Fill the kinetic/remainder snapshot norms from the chain trajectories."""
    be = PHASE_BETA * field.epsilon
    times = chain.times
    kin_sq = {s: np.zeros(times.size) for s in (0, 2)}
    rem_sq = {s: np.zeros(times.size) for s in (0, 2)}
    for k, data in per_mode.items():
        weight = chain.mode_weights.get(k)
        if weight is None:
            continue
        kinetic = sum(chain.trajectories[j][k] for j in chain.levels)
        full = data["full"]
        fluid = data["fluid"]
        if fluid is None:
            fluid = np.zeros_like(full)
        remainder = full - kinetic - fluid
        k2 = float(np.dot(k, k))
        for s in (0, 2):
            wgt = weight * (1.0 + be**2 * k2) ** s
            kin_sq[s] += wgt * np.einsum("ti,ti->t", kinetic, kinetic.conj()).real
            rem_sq[s] += wgt * np.einsum("ti,ti->t", remainder, remainder.conj()).real
    kin = {s: np.sqrt(v) for s, v in kin_sq.items()}
    rem = {s: np.sqrt(v) for s, v in rem_sq.items()}
    for i, snap in enumerate(snaps):
        snap.norm_kinetic = {s: float(kin[s][i]) for s in (0, 2)}
        snap.norm_remainder = {s: float(rem[s][i]) for s in (0, 2)}


def _projection_recon(ops, gap, epsilon: float, per_mode: dict) -> float:
    """Defect between traced fluid states and the spectral projector applied
    to the independently propagated full states, worst over modes and times."""
    from .mode import ModeOperator
    from .spectral import fluid_branch_indices, fluid_projector

    worst = 0.0
    for k, data in per_mode.items():
        if data["fluid"] is None:
            continue
        kvec = np.array(k, dtype=float)
        knorm = float(np.linalg.norm(kvec))
        scale = max(float(np.linalg.norm(data["full"][0])), 1e-300)
        if knorm == 0.0:
            V = ops.invariants5
            proj = data["full"] @ (V @ V.T)
        else:
            mop = ModeOperator(ops, kvec / knorm, PHASE_BETA * epsilon * knorm)
            es = mop.eigensystem()
            idx = fluid_branch_indices(es, gap.tau_hat)
            P = fluid_projector(es, idx)
            proj = data["full"] @ P.T
        defect = np.linalg.norm(proj - data["fluid"], axis=1)
        worst = max(worst, float(defect.max()) / scale)
    return worst


def _stage_fits(ctx: dict) -> None:
    cfg, out = ctx["cfg"], ctx["out"]
    gamma0 = cfg["gammas"][0]
    ops = ctx["ops"][gamma0]
    gap = ctx["gap"]
    chain = ctx["chain"]
    field = ctx["field"]

    # A10: remainder re-integration against expm-propagated full states
    k = next(iter(chain.mode_weights))
    u0 = field.coefficient(k)
    from .green import _mode_full_states

    full = _mode_full_states(ops, np.array(k, dtype=float), u0, chain.times,
                             field.epsilon)
    partial = sum(chain.trajectories[j][k] for j in chain.levels)
    r_indep = full - partial
    r_block = chain.remainder_trajectories[k]
    scale = float(np.linalg.norm(u0))
    reint_rel = float(np.max(np.linalg.norm(r_indep - r_block, axis=1)) / scale)
    r0_norm = float(np.linalg.norm(r_block[0]) / scale)

    rem2 = chain.remainder_norms[2]
    peak = int(np.argmax(rem2))
    gr_fit = _envelope_fit(chain.times[peak:], rem2[peak:], "EXP")
    ctx["checks"].append(
        check_a10_decomposition(
            ctx["recon_rel"], r0_norm, reint_rel, gr_fit, ops.c0_hat, gap.tau_hat
        )
    )

    # A8: cutoff-operator scaling on a dedicated finer lattice.  The slope is
    # fitted on the outer part of the admissible window: below D ~ 0.34R the
    # composed norm sits on a D-independent shoulder (the near-offset content
    # that saturates once the bump plateau covers the first lattice shells)
    # which masks the growth exponent of the cutoff-ball term.
    scans = {}
    rows = []
    for gamma in cfg["gammas"]:
        spec = _spec_for(cfg, gamma, n=cfg["scan_n"])
        grid = build_grid(spec)
        radius = grid.spec.radius
        d_vals = np.geomspace(0.345 * radius, 0.45 * radius, 5)
        scan = singular_norm_scan(grid, d_vals, seed=cfg["seed"])
        scans[gamma] = scan
        rows.extend(
            (gamma, float(d), float(nv))
            for d, nv in zip(scan.d_values, scan.norms)
        )
    write_csv(out / "ks_scan.csv", ["gamma", "d", "norm"], rows)
    ctx["checks"].append(check_a8_scaling(scans))

    # A11: commutation diagnostics
    rep = dt_commutator_check(ops, (1, 0, 0))
    damped = damped_commutator_envelope(
        ops, (1, 0, 0), np.linspace(0.0, 10.0, 41)
    )
    ctx["checks"].append(check_a11_commutation(rep, damped))

    if ctx["slow"]:
        ctx["checks"].append(_run_regimes(ctx))
    else:
        ctx["checks"].append(
            CheckResult(
                "A9",
                "long-wave regimes",
                None,
                "slow-only: run with --slow to exercise the three regimes",
            )
        )
    ctx["summaries"]["fits"] = {
        "reint_rel": reint_rel,
        "gr_rate": gr_fit.rate,
        "scan_slopes": {str(g): s.slope for g, s in scans.items()},
        "commutator_slopes": list(np.asarray(rep.slopes)),
    }


def _run_regimes(ctx: dict) -> CheckResult:
    cfg, out = ctx["cfg"], ctx["out"]
    ops = ctx["ops"][cfg["gammas"][0]]
    gap = ctx["gap"]
    wf = cfg["width_fraction"]
    rows = []

    # regime I: no long modes exist, the fluid bucket must vanish identically
    eps1 = 2.0 * gap.delta_hat
    f1 = prepare_initial({"profile": "bump1d_poly", "width_fraction": wf},
                         ops.grid, eps1)
    t1 = np.linspace(0.0, 5.0, 11)
    fl1 = fluid_norm_series(f1, ops, gap, t1)
    rows.extend(("I", float(t), float(v), 0.0) for t, v in zip(t1, fl1))

    # regime II: quadratic-in-epsilon fluid decay rates
    rates = []
    eps_list = [0.5 * gap.delta_hat, 0.7 * gap.delta_hat]
    a2_min = float(np.min(ctx["branch_fit"].a2)) if "branch_fit" in ctx else 0.5
    for eps in eps_list:
        f2 = prepare_initial({"profile": "bump1d_poly", "width_fraction": wf},
                             ops.grid, eps)
        kappa1 = PHASE_BETA * eps
        t_hi = 4.0 / max(2.0 * a2_min * kappa1**2, 1e-2)
        t2 = np.linspace(0.0, t_hi, 33)
        fl2 = fluid_norm_series(f2, ops, gap, t2)
        mask = fl2 > 1e-13 * fl2.max()
        fit = fit_decay(t2[mask], fl2[mask], "EXP")
        rates.append(fit.rate)
        rows.extend(
            (f"II_eps{eps:.4f}", float(t), float(v), fit.rate)
            for t, v in zip(t2, fl2)
        )

    # regime III: dense long-wave lattice, t^{-3/2} amplitude law and mode sum
    eps3 = 0.05 * gap.delta_hat
    f3 = prepare_initial({"profile": "bump3d_poly", "width_fraction": wf},
                         ops.grid, eps3)
    Y = min(gap.delta_hat, eps3 * cfg["k_max"])
    diff = max(a2_min * PHASE_BETA**2, 1e-3)
    t_lo, t_hi = 10.0 / (diff * Y**2), 0.1 * np.pi**2 / (diff * eps3**2)
    t3 = np.geomspace(t_lo, t_hi, 12)
    amp = fluid_pointwise_norms(f3, ops, gap, t3)
    fit3 = fit_decay(t3, amp, "POLY_EXP")

    ts_lo, ts_hi = 10.0 / Y**2, 0.1 * np.pi**2 / eps3**2
    ts = np.geomspace(ts_lo, ts_hi, 8)
    envelope = fluid_mode_sum_envelope(f3, ops, gap, ts)
    ref = np.pi**1.5 * ts**-1.5
    dev = float(np.max(np.abs(envelope.mode_sum / ref - 1.0)))
    rows.extend(
        ("III_amp", float(t), float(v), float(r))
        for t, v, r in zip(t3, amp, np.full_like(t3, fit3.poly_order))
    )
    rows.extend(
        ("III_sum", float(t), float(v), float(r))
        for t, v, r in zip(ts, envelope.mode_sum, ref)
    )
    write_csv(out / "regimes.csv", ["regime", "t", "value", "reference"], rows)

    data = {
        "I": float(np.max(fl1)),
        "II": {"eps": eps_list, "rates": rates},
        "III": {"poly_order": fit3.poly_order, "mode_sum_dev": dev},
    }
    ctx["summaries"]["regimes"] = data
    return check_a9_regimes(data)
