"""Initial data as Fourier mode fields, and the solution-operator decompositions.

A field I(x, xi) = g(x) phi(xi) on the side-1/epsilon torus is represented by
its mode coefficients I_k = g_k * phi with g_k the normalized Fourier
coefficient (1/|T^3|) int g e^{-i beta eps k.x} dx, held in closed form for the
built-in profile family.  Velocity factors are stored in the quadrature-scaled
representation, so every L2_xi norm is a plain Euclidean norm and Parseval
sums need no extra volume factor.

Decomposition buckets per mode: short-wave if epsilon|k| >= delta_hat,
otherwise the propagated state splits into its fluid part (the five
eigenvalue branches above the -tau_hat line) and the long-wave complement.
The three buckets sum to the propagated state identically, by construction.

For dense 3-D mode lattices the fluid eigendata is computed once per orbit of
the signed-permutation cube group: A(Qk) = P A(k) P^T for the node relabeling
P induced by Q, so eigenpairs transfer across the orbit by index permutation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg as sla

from .collision import CollisionOperators
from .grid import VelocityGrid
from .mode import PHASE_BETA, ModeOperator, _bilinear_normalize
from .spectral import GapEstimate, classify_regime, fluid_branch_indices

_PROFILE_NAMES = (
    "bump1d_poly",
    "bump1d_gauss",
    "bump3d_poly",
    "bump3d_gauss",
    "cosine_mode_poly",
    "cosine_mode_gauss",
)

_CONFIG_KEYS = {
    "profile",
    "width_fraction",
    "amplitude",
    "zero_mean",
    "velocity_shift",
}


@dataclass
class ModeField:
    """Separable Fourier field: coefficient(k) = scalar_k * base, plus overrides."""

    grid: VelocityGrid
    epsilon: float
    base: np.ndarray
    scalars: dict
    overrides: dict = dc_field(default_factory=dict)
    zero_mean: bool = False
    tail_estimate: float = 0.0
    profile_name: str = ""

    def __post_init__(self):
        self._base_norm_sq = float(np.vdot(self.base, self.base).real)

    def modes(self) -> list:
        keys = set(self.scalars) | set(self.overrides)
        return sorted(keys)

    def coefficient(self, k) -> np.ndarray:
        k = tuple(int(c) for c in k)
        if k in self.overrides:
            return self.overrides[k]
        return complex(self.scalars[k]) * self.base.astype(complex)

    def coefficient_norm_sq(self, k) -> float:
        k = tuple(int(c) for c in k)
        if k in self.overrides:
            vec = self.overrides[k]
            return float(np.vdot(vec, vec).real)
        return abs(self.scalars[k]) ** 2 * self._base_norm_sq


def _raised_cosine_hat(epsilon: float, half_width: float, m: int) -> float:
    """Normalized Fourier coefficient of (1 + cos(pi x / a))/2 on [-a, a]."""
    u = 2.0 * epsilon * half_width * m
    return float(
        epsilon
        * half_width
        * (np.sinc(u) + 0.5 * np.sinc(u - 1.0) + 0.5 * np.sinc(u + 1.0))
    )


def _phi_poly(grid: VelocityGrid) -> np.ndarray:
    pts = grid.points
    poly = 1.0 + pts[:, 0] + pts[:, 0] * pts[:, 1]
    return poly * grid.sqrt_maxwellian * grid.sqrt_weights


def _phi_gauss(grid: VelocityGrid, shift) -> np.ndarray:
    pts = grid.points
    shift = np.asarray(shift, dtype=float)
    d2 = np.sum((pts - shift[None, :]) ** 2, axis=1)
    # shifted Gaussian divided by sqrt(M), kept in exponent space
    r2 = np.einsum("ij,ij->i", pts, pts)
    expo = -0.5 * d2 + 0.25 * r2 - 0.75 * np.log(2.0 * np.pi)
    return np.exp(expo) * grid.sqrt_weights


def prepare_initial(config: dict, grid: VelocityGrid, epsilon: float) -> ModeField:
    """Closed-form mode coefficients for a named separable profile."""
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown initial-data keys: {sorted(unknown)}")
    name = config.get("profile")
    if name not in _PROFILE_NAMES:
        raise ValueError(f"unknown profile {name!r}; choose from {_PROFILE_NAMES}")
    width_fraction = float(config.get("width_fraction", 0.25))
    if not 0.0 < width_fraction <= 1.0:
        raise ValueError("width_fraction must lie in (0, 1]")
    amplitude = float(config.get("amplitude", 1.0))
    zero_mean = bool(config.get("zero_mean", True))
    shift = config.get("velocity_shift", (0.5, 0.0, 0.0))

    spatial, velocity = name.rsplit("_", 1)
    phi = _phi_poly(grid) if velocity == "poly" else _phi_gauss(grid, shift)
    kmax = grid.spec.k_max
    half_width = width_fraction / (2.0 * epsilon)

    scalars: dict = {}
    if spatial == "cosine_mode":
        scalars[(1, 0, 0)] = 0.5 * amplitude
        scalars[(-1, 0, 0)] = 0.5 * amplitude
        scalars[(0, 0, 0)] = 0.0
        tail = 0.0
    elif spatial == "bump1d":
        for m in range(-kmax, kmax + 1):
            scalars[(m, 0, 0)] = amplitude * _raised_cosine_hat(epsilon, half_width, m)
        tail_sq = sum(
            (amplitude * _raised_cosine_hat(epsilon, half_width, m)) ** 2
            for m in range(kmax + 1, 4 * kmax + 1)
        )
        tail = np.sqrt(2.0 * tail_sq * np.vdot(phi, phi).real)
    else:  # bump3d
        line = {
            m: _raised_cosine_hat(epsilon, half_width, m)
            for m in range(-4 * kmax, 4 * kmax + 1)
        }
        for k in itertools.product(range(-kmax, kmax + 1), repeat=3):
            scalars[k] = amplitude * line[k[0]] * line[k[1]] * line[k[2]]
        s_small = sum(line[m] ** 2 for m in range(-kmax, kmax + 1))
        s_big = sum(line[m] ** 2 for m in range(-4 * kmax, 4 * kmax + 1))
        tail = abs(amplitude) * np.sqrt(
            max(s_big**3 - s_small**3, 0.0) * np.vdot(phi, phi).real
        )

    # drop exact zeros except the mean mode, which carries the moment bookkeeping
    scalars = {k: v for k, v in scalars.items() if v != 0.0 or k == (0, 0, 0)}
    field = ModeField(
        grid=grid,
        epsilon=float(epsilon),
        base=phi,
        scalars=scalars,
        zero_mean=False,
        tail_estimate=float(tail),
        profile_name=name,
    )
    if zero_mean:
        _enforce_zero_mean(field)
    return field


def _enforce_zero_mean(field: ModeField) -> None:
    from .collision import collision_invariants

    k0 = (0, 0, 0)
    vec = field.coefficient(k0) if (k0 in field.scalars or k0 in field.overrides) else None
    if vec is None:
        vec = np.zeros(field.grid.size, dtype=complex)
    V = collision_invariants(field.grid)
    vec = vec - V @ (V.T @ vec)
    field.overrides[k0] = vec
    field.scalars.pop(k0, None)
    field.zero_mean = True


def parseval_norm(field: ModeField, s: int = 0) -> float:
    """sqrt of sum_k (1 + |beta eps k|^2)^s ||I_k||^2 over retained modes."""
    if s < 0:
        raise ValueError("Sobolev order must be nonnegative")
    be = PHASE_BETA * field.epsilon
    total = 0.0
    for k in field.modes():
        k2 = float(k[0] ** 2 + k[1] ** 2 + k[2] ** 2)
        total += (1.0 + be**2 * k2) ** s * field.coefficient_norm_sq(k)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# propagation helpers

def _is_uniform(times: np.ndarray) -> bool:
    if times.size < 3:
        return True
    d = np.diff(times)
    return bool(np.all(np.abs(d - d[0]) <= 1e-9 * max(abs(d[0]), 1e-30)))


def _expm_states(A: np.ndarray, u0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """e^{At} u0 at each time; uniform grids reuse a single stepped exponential."""
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size,) + u0.shape, dtype=complex)
    d = np.diff(times)
    uniform = _is_uniform(times) and times.size >= 2
    first_on_grid = uniform and (
        abs(times[0]) < 1e-12 or abs(times[0] - d[0]) < 1e-9 * max(d[0], 1e-30)
    )
    if uniform and first_on_grid and d[0] > 0.0:
        E = sla.expm(A * d[0])
        cur = u0.astype(complex)
        if abs(times[0]) < 1e-12:
            out[0] = cur
            start = 1
        else:
            cur = E @ cur
            out[0] = cur
            start = 1
        for i in range(start, times.size):
            cur = E @ cur
            out[i] = cur
        return out
    cache: dict = {}
    cur = u0.astype(complex)
    t_cur = 0.0
    for i, t in enumerate(times):
        gap_t = t - t_cur
        if abs(gap_t) < 1e-14:
            out[i] = cur
            continue
        key = round(gap_t, 12)
        if key not in cache:
            cache[key] = sla.expm(A * gap_t)
        cur = cache[key] @ cur
        t_cur = t
        out[i] = cur
    return out


def _homogeneous_eigh(ops: CollisionOperators):
    def compute():
        vals, vecs = sla.eigh(ops.l_full)
        return vals, vecs

    return ops.cache_get_or_compute(("sym_eigh",), compute)


def _mode_full_states(
    ops: CollisionOperators, kvec, u0: np.ndarray, times: np.ndarray, epsilon: float
) -> np.ndarray:
    kvec = np.asarray(kvec, dtype=float)
    if np.linalg.norm(kvec) == 0.0:
        vals, vecs = _homogeneous_eigh(ops)
        coeff = vecs.T @ u0
        phases = np.exp(np.outer(times, vals))
        return (phases * coeff[None, :]) @ vecs.T
    A = ModeOperator(
        ops, kvec / np.linalg.norm(kvec),
        PHASE_BETA * epsilon * np.linalg.norm(kvec),
    ).matrix
    return _expm_states(A, u0, times)


def _mode_fluid_states(
    ops: CollisionOperators,
    gap: GapEstimate,
    kvec,
    u0: np.ndarray,
    times: np.ndarray,
    epsilon: float,
) -> np.ndarray:
    """Fluid component of e^{At} u0 for a long-wave mode."""
    kvec = np.asarray(kvec, dtype=float)
    norm = np.linalg.norm(kvec)
    if norm == 0.0:
        V = ops.invariants5
        proj = V @ (V.T @ u0)
        return np.broadcast_to(proj, (times.size,) + proj.shape).astype(complex)
    op = ModeOperator(ops, kvec / norm, PHASE_BETA * epsilon * norm)
    es = op.eigensystem()
    idx = fluid_branch_indices(es, gap.tau_hat)
    coeff = es.decompose(u0)
    phases = np.exp(np.outer(times, es.eigvals[idx]))
    return (phases * coeff[idx][None, :]) @ es.vectors[:, idx].T


def _canonical_weights(field: ModeField) -> list:
    out = []
    for k in field.modes():
        neg = tuple(-c for c in k)
        if k == neg:
            out.append((k, 1.0))
        elif k > neg:
            out.append((k, 2.0))
    return out


# ---------------------------------------------------------------------------
# snapshots

@dataclass
class DecompositionSnapshot:
    t: float
    norm_total: dict
    norm_short: dict
    norm_long_perp: dict
    norm_fluid: dict
    regime_tag: str
    norm_kinetic: dict | None = None
    norm_remainder: dict | None = None


def green_snapshot_series(
    field: ModeField,
    ops: CollisionOperators,
    gap: GapEstimate,
    times,
    s_orders=(0, 2),
    keep_modes: bool = False,
):
    """Bucket norms of the synthesized solution at each time.

    Cost scales with the number of retained modes times a dense matrix
    exponential each; intended for the 1-D profile family.  Dense 3-D lattices
    should use fluid_norm_series, which needs only per-orbit eigendata.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0.0):
        raise ValueError("times must be nonnegative")
    be = PHASE_BETA * field.epsilon
    tag = classify_regime(field.epsilon, gap)
    acc = {
        name: {s: np.zeros(times.size) for s in s_orders}
        for name in ("total", "short", "long_perp", "fluid")
    }
    per_mode = {}
    for k, weight in _canonical_weights(field):
        u0 = field.coefficient(k)
        if np.linalg.norm(u0) == 0.0:
            continue
        kvec = np.array(k, dtype=float)
        knorm = np.linalg.norm(kvec)
        full = _mode_full_states(ops, kvec, u0, times, field.epsilon)
        is_long = field.epsilon * knorm < gap.delta_hat
        if is_long:
            fluid = _mode_fluid_states(ops, gap, kvec, u0, times, field.epsilon)
            perp = full - fluid
        else:
            fluid = None
            perp = None
        sq_full = np.einsum("ti,ti->t", full, full.conj()).real
        k2 = float(knorm**2)
        for s in s_orders:
            wgt = weight * (1.0 + be**2 * k2) ** s
            acc["total"][s] += wgt * sq_full
            if is_long:
                acc["fluid"][s] += wgt * np.einsum("ti,ti->t", fluid, fluid.conj()).real
                acc["long_perp"][s] += wgt * np.einsum("ti,ti->t", perp, perp.conj()).real
            else:
                acc["short"][s] += wgt * sq_full
        if keep_modes:
            per_mode[k] = {"full": full, "fluid": fluid, "perp": perp}
    snapshots = [
        DecompositionSnapshot(
            t=float(t),
            norm_total={s: float(np.sqrt(acc["total"][s][i])) for s in s_orders},
            norm_short={s: float(np.sqrt(acc["short"][s][i])) for s in s_orders},
            norm_long_perp={
                s: float(np.sqrt(acc["long_perp"][s][i])) for s in s_orders
            },
            norm_fluid={s: float(np.sqrt(acc["fluid"][s][i])) for s in s_orders},
            regime_tag=tag,
        )
        for i, t in enumerate(times)
    ]
    if keep_modes:
        return snapshots, per_mode
    return snapshots


def synthesize_green(
    field: ModeField, ops: CollisionOperators, gap: GapEstimate, t: float
) -> DecompositionSnapshot:
    """Single-time decomposition snapshot."""
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    return green_snapshot_series(field, ops, gap, np.array([float(t)]))[0]


# ---------------------------------------------------------------------------
# cube-group orbit machinery for dense mode lattices

def _signed_permutations():
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            Q = np.zeros((3, 3), dtype=int)
            for row, (col, sgn) in enumerate(zip(perm, signs)):
                Q[row, col] = sgn
            mats.append(Q)
    return mats


_SIGNED_PERMS = _signed_permutations()


def orbit_representative(k) -> tuple:
    return tuple(sorted((abs(int(c)) for c in k), reverse=True))


def _matching_transform(rep, k) -> np.ndarray:
    rep = np.array(rep, dtype=int)
    target = np.array(k, dtype=int)
    for Q in _SIGNED_PERMS:
        if np.array_equal(Q @ rep, target):
            return Q
    raise ValueError(f"{k} is not in the orbit of {rep}")


def _node_permutation(grid: VelocityGrid, Q: np.ndarray) -> np.ndarray:
    """Index array p with points[p[i]] = Q^T points[i]."""
    n, h = grid.n, grid.h
    idx = np.rint((grid.points + grid.spec.radius) / h).astype(int)
    tidx = np.rint((grid.points @ Q + grid.spec.radius) / h).astype(int)
    return (tidx[:, 0] * n + tidx[:, 1]) * n + tidx[:, 2]


def _rep_fluid_data(ops: CollisionOperators, gap: GapEstimate, rep: tuple, epsilon: float):
    """Fluid eigenvalues/vectors and their Hermitian Gram for one orbit rep."""
    from .spectral import _nearest_zero_pairs

    def compute():
        knorm = float(np.linalg.norm(rep))
        if knorm == 0.0:
            V = ops.invariants5.astype(complex)
            return np.zeros(5, dtype=complex), V, np.eye(5, dtype=complex)
        kappa = PHASE_BETA * epsilon * knorm
        khat = np.array(rep, dtype=float) / knorm
        vals, vecs, _res = _nearest_zero_pairs(ops, khat, kappa, 10)
        keep = np.flatnonzero(vals.real > -gap.tau_hat)
        if keep.size != 5:
            raise ArithmeticError(
                f"{keep.size} fluid candidates above -tau_hat for orbit {rep}; "
                "mode may sit outside the long-wave window"
            )
        vals, vecs = vals[keep], vecs[:, keep]
        order = np.lexsort((vals.imag, -vals.real))
        vals, vecs = vals[order], vecs[:, order].copy()
        vecs, flagged = _bilinear_normalize(vals, vecs)
        if flagged:
            raise ArithmeticError(f"defective fluid cluster for orbit {rep}")
        gram = vecs.conj().T @ vecs
        return vals, vecs, gram

    key = ("rep_fluid", rep, round(epsilon, 14), round(gap.tau_hat, 14))
    return ops.cache_get_or_compute(key, compute)


def fluid_norm_series(
    field: ModeField,
    ops: CollisionOperators,
    gap: GapEstimate,
    times,
    s: int = 0,
) -> np.ndarray:
    """Parseval norm of the fluid bucket over time, via per-orbit eigendata."""
    times = np.asarray(times, dtype=float)
    be = PHASE_BETA * field.epsilon
    grid = ops.grid
    long_modes = [
        k
        for k in field.modes()
        if field.epsilon * np.linalg.norm(k) < gap.delta_hat
        and field.coefficient_norm_sq(k) > 0.0
    ]
    by_rep: dict = {}
    for k in long_modes:
        by_rep.setdefault(orbit_representative(k), []).append(k)

    total = np.zeros(times.size)
    for rep, members in sorted(by_rep.items()):
        vals, vecs, gram = _rep_fluid_data(ops, gap, rep, field.epsilon)
        cmat = np.zeros((5, 5), dtype=complex)
        for k in members:
            Q = _matching_transform(rep, k)
            perm = _node_permutation(grid, Q)
            u = field.coefficient(k)
            w = np.empty_like(u)
            w[perm] = u
            c = vecs.T @ w
            k2 = float(k[0] ** 2 + k[1] ** 2 + k[2] ** 2)
            weight = (1.0 + be**2 * k2) ** s
            cmat += weight * np.outer(c.conj(), c)
        rates = vals.conj()[:, None] + vals[None, :]
        for i, t in enumerate(times):
            total[i] += float(np.sum(cmat * gram * np.exp(rates * t)).real)
    return np.sqrt(np.maximum(total, 0.0))


def fluid_pointwise_norms(
    field: ModeField,
    ops: CollisionOperators,
    gap: GapEstimate,
    times,
) -> np.ndarray:
    """L2_xi norm of the fluid component synthesized at the spatial origin.

    Summing every long-wave mode coefficient evaluates the field at x = 0;
    for heat-kernel-like data this amplitude carries the t^{-3/2} law, unlike
    the Parseval norm whose square does.
    """
    times = np.asarray(times, dtype=float)
    grid = ops.grid
    acc = np.zeros((times.size, grid.size), dtype=complex)
    by_rep: dict = {}
    for k in field.modes():
        if (
            field.epsilon * np.linalg.norm(k) < gap.delta_hat
            and field.coefficient_norm_sq(k) > 0.0
        ):
            by_rep.setdefault(orbit_representative(k), []).append(k)
    for rep, members in sorted(by_rep.items()):
        vals, vecs, _gram = _rep_fluid_data(ops, gap, rep, field.epsilon)
        phases = np.exp(np.outer(times, vals))
        for k in members:
            Q = _matching_transform(rep, k)
            perm = _node_permutation(grid, Q)
            u = field.coefficient(k)
            w = np.empty_like(u)
            w[perm] = u
            c = vecs.T @ w
            states = (phases * c[None, :]) @ vecs.T
            acc += states[:, perm]
    return np.linalg.norm(acc, axis=1)


@dataclass
class ModeSumEnvelope:
    times: np.ndarray
    mode_sum: np.ndarray
    fluid_norms: np.ndarray


def fluid_mode_sum_envelope(
    field: ModeField, ops: CollisionOperators, gap: GapEstimate, times
) -> ModeSumEnvelope:
    """Normalized Riemann mode sum and the fluid norm series, for envelope checks.

    The sum (1/|T^3|) sum_{|eps k| < delta_hat} exp(-(eps|k|)^2 t) approaches
    the Gaussian integral pi^{3/2} t^{-3/2} once t is large enough for the
    lattice to resolve the Gaussian and small enough that the spacing error is
    negligible.
    """
    if field.epsilon >= gap.delta_hat:
        raise ValueError("mode-sum comparison requires epsilon < delta_hat")
    times = np.asarray(times, dtype=float)
    eps = field.epsilon
    ks = np.array(field.modes(), dtype=float)
    k2 = np.einsum("ij,ij->i", ks, ks)
    long_mask = eps * np.sqrt(k2) < gap.delta_hat
    sums = np.array(
        [float(eps**3 * np.sum(np.exp(-(eps**2) * k2[long_mask] * t))) for t in times]
    )
    fluid = fluid_norm_series(field, ops, gap, times, s=0)
    return ModeSumEnvelope(times=times, mode_sum=sums, fluid_norms=fluid)
