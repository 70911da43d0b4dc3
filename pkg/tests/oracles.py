"""Independent references for the time-integration tests.

Everything here propagates the coupled block systems with one dense
``scipy.linalg.expm`` of the stacked generator per output time.  That shares
no stepping, table, or interpolation code with the exponential integrator it
is used to validate; agreement is meaningful because the only common inputs
are the generator matrices themselves.
"""

import numpy as np
from scipy.linalg import expm

from landaulab.kinetic import chain_generators


def _stacked(diag_blocks, sub_blocks):
    """Block lower-bidiagonal matrix from its diagonal and subdiagonal."""
    n = diag_blocks[0].shape[0]
    nb = len(diag_blocks)
    big = np.zeros((nb * n, nb * n), dtype=complex)
    for b, A in enumerate(diag_blocks):
        big[b * n:(b + 1) * n, b * n:(b + 1) * n] = A
    for b, C in enumerate(sub_blocks, start=1):
        big[b * n:(b + 1) * n, (b - 1) * n:b * n] = C
    return big


def chain_reference(ops, k, u0, j_max, times, with_remainder=False, epsilon=None):
    """All chain levels by exponentiating the stacked system.

    Returns an array of shape (len(times), n_blocks, n) whose block order
    matches the integrator: semigroup level, then v_0 .. v_{j_max}, then the
    remainder block when requested.
    """
    gens = chain_generators(ops, k, epsilon)
    k_reg = (ops.k_mod - ops.k_singular).astype(complex)
    diag = [gens["outer"]] + [gens["inner"]] * (j_max + 1)
    sub = [k_reg] + [ops.k_mod.astype(complex)] * j_max
    if with_remainder:
        diag.append(gens["full"])
        sub.append(ops.k_mod.astype(complex))
    big = _stacked(diag, sub)
    n = diag[0].shape[0]
    state0 = np.zeros(big.shape[0], dtype=complex)
    state0[:n] = u0
    out = np.empty((len(times), len(diag), n), dtype=complex)
    for it, t in enumerate(times):
        out[it] = (expm(big * t) @ state0).reshape(len(diag), n)
    return out


def mixture_reference(ops, k, f0, j, times, epsilon=None):
    """Last block of the 2j+1 stage iterated-integral system, per time."""
    gens = chain_generators(ops, k, epsilon)
    nb = 2 * j + 1
    big = _stacked([gens["inner"]] * nb, [ops.k_mod.astype(complex)] * (nb - 1))
    n = gens["inner"].shape[0]
    state0 = np.zeros(big.shape[0], dtype=complex)
    state0[:n] = f0
    out = np.empty((len(times), n), dtype=complex)
    for it, t in enumerate(times):
        out[it] = (expm(big * t) @ state0)[(nb - 1) * n:]
    return out
