"""Single spatial Fourier mode of the linearized dynamics.

For wavevector k the mode amplitude obeys du/dt = A u with

    A = L - i * kappa * diag(xi . khat),      kappa = PHASE_BETA * epsilon * |k|,

in the quadrature-scaled representation.  A is complex symmetric (L is real
symmetric, the transport term is i times a real diagonal), so left eigenvectors
are the plain transposes of right ones and the natural pairing is the bilinear
form v^T u, not the Hermitian one.  Eigenbases are normalized to v^T v = 1 with
degenerate clusters handled as blocks; decomposition falls back to a direct
solve so propagation stays exact even near parameter values where two branches
touch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .collision import CollisionOperators

PHASE_BETA = 2.0 * np.pi

GENERATOR_TAGS = ("FULL_L", "LAMBDA_ONLY", "LAMBDA_PLUS_KS")

_CLUSTER_TOL = 1e-8


def _unit(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("direction vector must be nonzero")
    return v / nrm


def kappa_of_mode(spec_epsilon: float, k: np.ndarray) -> float:
    """Reduced wavenumber of an integer lattice mode."""
    return PHASE_BETA * spec_epsilon * float(np.linalg.norm(np.asarray(k, dtype=float)))


@dataclass
class EigenSystem:
    """Sorted spectrum of one mode matrix with a bilinear-normalized basis."""

    kappa: float
    khat: np.ndarray
    eigvals: np.ndarray
    vectors: np.ndarray
    eig_residual: float = 0.0
    biorth_residual: float = 0.0
    quasi_defective: bool = False

    @property
    def right_vectors(self) -> np.ndarray:
        return self.vectors

    @property
    def left_vectors(self) -> np.ndarray:
        """Left eigenvectors; for a complex symmetric matrix these are conj(right)."""
        return np.conj(self.vectors)

    def decompose(self, u0: np.ndarray) -> np.ndarray:
        """Expansion coefficients of u0 in the eigenbasis (direct solve)."""
        return np.linalg.solve(self.vectors, np.asarray(u0, dtype=complex))

    def evolve(self, u0: np.ndarray, times) -> np.ndarray:
        """States V exp(Lambda t) V^{-1} u0 at each requested time, row per time."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        coeffs = self.decompose(u0)
        phases = np.exp(np.outer(times, self.eigvals))
        return (phases * coeffs[None, :]) @ self.vectors.T


def _cluster_slices(vals: np.ndarray):
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    edges = [0]
    for i in range(1, vals.size):
        if abs(vals[i] - vals[i - 1]) > _CLUSTER_TOL * scale:
            edges.append(i)
    edges.append(vals.size)
    return [slice(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def _bilinear_normalize(vals: np.ndarray, vecs: np.ndarray):
    """Normalize so V^T V = I blockwise; report clusters that resist it."""
    flagged = False
    for sl in _cluster_slices(vals):
        block = vecs[:, sl]
        gram = block.T @ block
        if sl.stop - sl.start == 1:
            g = gram[0, 0]
            if abs(g) < 1e-12:
                flagged = True
                continue
            vecs[:, sl] = block / np.sqrt(g)
            continue
        svals = np.linalg.svd(gram, compute_uv=False)
        if svals[-1] < 1e-10 * max(svals[0], 1.0):
            flagged = True
            continue
        vecs[:, sl] = block @ np.linalg.inv(sla.sqrtm(gram))
    return vecs, flagged


def build_eigensystem(matrix: np.ndarray, kappa: float, khat: np.ndarray) -> EigenSystem:
    if np.max(np.abs(matrix.imag)) == 0.0:
        # real symmetric case (kappa = 0): orthogonal basis from the fast path
        vals_r, vecs_r = sla.eigh(matrix.real)
        vals = vals_r.astype(complex)
        vecs = vecs_r.astype(complex)
    else:
        vals, vecs = sla.eig(matrix)
    order = np.lexsort((vals.imag, -vals.real))
    vals, vecs = vals[order], vecs[:, order]
    vecs, flagged = _bilinear_normalize(vals, vecs)
    scale = max(float(np.linalg.norm(matrix)), 1e-300)
    eig_res = float(
        np.linalg.norm(matrix @ vecs - vecs * vals[None, :]) / scale
    )
    gram = vecs.T @ vecs
    biorth = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    return EigenSystem(
        kappa=kappa,
        khat=khat,
        eigvals=vals,
        vectors=vecs,
        eig_residual=eig_res,
        biorth_residual=biorth,
        quasi_defective=flagged,
    )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    kappa: float
    khat: np.ndarray
    method: str
    eig_fallback: bool = False

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


class ModeOperator:
    """The matrix A(kappa, khat) together with cached spectral data."""

    def __init__(
        self,
        ops: CollisionOperators,
        khat,
        kappa: float,
        generator_tag: str = "FULL_L",
    ):
        if generator_tag not in GENERATOR_TAGS:
            raise ValueError(f"unknown generator tag {generator_tag!r}")
        self.ops = ops
        self.khat = _unit(khat)
        self.kappa = float(kappa)
        self.generator_tag = generator_tag
        self._transport = self.ops.grid.points @ self.khat

    @property
    def generator(self) -> np.ndarray:
        """The real symmetric part: L, Lambda, or Lambda + K_s."""
        if self.generator_tag == "FULL_L":
            return self.ops.l_full
        if self.generator_tag == "LAMBDA_ONLY":
            return self.ops.lambda_mod
        return self.ops.lambda_mod + self.ops.k_singular

    @property
    def matrix(self) -> np.ndarray:
        A = self.generator.astype(complex, copy=True)
        A[np.diag_indices_from(A)] -= 1j * self.kappa * self._transport
        return A

    def _cache_key(self):
        return (
            self.generator_tag,
            round(self.kappa, 12),
            tuple(np.round(self.khat, 12)),
        )

    def eigensystem(self) -> EigenSystem:
        return self.ops.cache_get_or_compute(
            self._cache_key(),
            lambda: build_eigensystem(self.matrix, self.kappa, self.khat),
        )

    def propagate(self, u0: np.ndarray, times, method: str = "auto") -> Trajectory:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        u0 = np.asarray(u0, dtype=complex)
        if u0.shape != (self.ops.grid.size,):
            raise ValueError("initial state has wrong length for this grid")
        if method not in ("auto", "eig", "ode"):
            raise ValueError("method must be 'auto', 'eig' or 'ode'")
        fallback = False
        states = None
        if method in ("auto", "eig"):
            try:
                states = self.eigensystem().evolve(u0, times)
                method = "eig"
            except (np.linalg.LinAlgError, ValueError):
                if method == "eig":
                    raise
                fallback = True
        if states is None:
            A = self.matrix
            sol = solve_ivp(
                lambda _t, y: A @ y,
                (0.0, float(times[-1])),
                u0,
                method="DOP853",
                t_eval=times,
                rtol=1e-8,
                atol=1e-11,
            )
            if not sol.success:
                raise RuntimeError(f"mode integration failed: {sol.message}")
            states = sol.y.T
            method = "ode"
        return Trajectory(
            times=times,
            states=states,
            kappa=self.kappa,
            khat=self.khat,
            method=method,
            eig_fallback=fallback,
        )


def mode_operator(
    ops: CollisionOperators,
    k=None,
    khat=None,
    kappa: float | None = None,
    generator_tag: str = "FULL_L",
) -> ModeOperator:
    """Construct A for an integer mode k, or directly from (khat, kappa)."""
    if k is not None:
        if khat is not None or kappa is not None:
            raise ValueError("pass either k or (khat, kappa), not both")
        k = np.asarray(k, dtype=float)
        if ops.grid.spec.k_max and np.max(np.abs(k)) > ops.grid.spec.k_max:
            raise ValueError("mode index exceeds the configured k_max")
        norm = np.linalg.norm(k)
        if norm == 0.0:
            return ModeOperator(ops, np.array([1.0, 0.0, 0.0]), 0.0, generator_tag)
        return ModeOperator(
            ops, k / norm, PHASE_BETA * ops.grid.spec.epsilon * norm, generator_tag
        )
    if khat is None or kappa is None:
        raise ValueError("need k, or both khat and kappa")
    return ModeOperator(ops, khat, float(kappa), generator_tag)
