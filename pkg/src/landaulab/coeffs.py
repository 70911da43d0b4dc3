"""Interaction matrix and Maxwellian-averaged diffusion coefficients.

The interaction matrix is Phi(xi) = |xi|^{gamma+2} (I - xihat xihat^T) and the
diffusion matrix is its Maxwellian average

    theta(xi) = integral Phi(xi - xs) M(xs) dxs.

By isotropy theta(xi) has a simple eigenvalue lambda1 along xi and a double
eigenvalue lambda2 orthogonal to it.  Fixing xi = r e_z and integrating the
azimuthal angle exactly leaves one radial integral whose angular part is a
closed-form polynomial in w = |xi - xs|:

    lambda1(r) = (2 pi)^{-1/2} int rho^4 e^{-rho^2/2} J1(r, rho) drho
    trace(r)   = 2 (2 pi)^{-1/2} int rho^2 e^{-rho^2/2} J0(r, rho) drho

with a = |r - rho|, b = r + rho,

    J0 = (b^{g+4} - a^{g+4}) / ((g+4) r rho)
    J1 = [ -w^{g+6}/(g+6) + (a^2+b^2) w^{g+4}/(g+4) - a^2 b^2 w^{g+2}/(g+2) ]_a^b
         / (4 r^3 rho^3)

and lambda2 = (trace - lambda1)/2.  For gamma = 0 this gives lambda1 = 2 and
lambda2 = r^2 + 2 exactly, a useful spot check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .grid import GridSpec

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))
#: the radial quadrature integrates rho over [0, r + _RHO_PAD]; beyond that the
#: Gaussian factor is below 1e-18
_RHO_PAD = 9.0


def phi_matrix(xi: np.ndarray, gamma: float) -> np.ndarray:
    """Interaction matrix B(|xi|) S(xi) = |xi|^{gamma+2} (I - xihat xihat^T)."""
    xi = np.asarray(xi, dtype=float)
    r2 = float(xi @ xi)
    if r2 == 0.0:
        raise ValueError("phi_matrix is undefined at xi = 0")
    return r2 ** (0.5 * gamma) * (r2 * np.eye(3) - np.outer(xi, xi))


def _angular_j0(r: float, rho: float, g: float) -> float:
    a, b = abs(r - rho), r + rho
    return (b ** (g + 4.0) - a ** (g + 4.0)) / ((g + 4.0) * r * rho)


def _angular_j1(r: float, rho: float, g: float) -> float:
    a, b = abs(r - rho), r + rho
    aa, bb = a * a, b * b

    def prim(w: float) -> float:
        return (
            -(w ** (g + 6.0)) / (g + 6.0)
            + (aa + bb) * w ** (g + 4.0) / (g + 4.0)
            - aa * bb * w ** (g + 2.0) / (g + 2.0)
        )

    return (prim(b) - prim(a)) / (4.0 * r**3 * rho**3)


def theta_eigs(r: float, gamma: float) -> tuple[float, float]:
    """Eigenvalues (lambda1, lambda2) of theta at radius r >= 0."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    g = gamma
    if r == 0.0:
        # both angular factors have smooth r -> 0 limits
        lam1 = (
            quad(lambda rho: rho**4 * np.exp(-0.5 * rho**2) * (4.0 / 3.0) * rho**g,
                 0.0, _RHO_PAD)[0] / _SQRT_2PI
        )
        tr = (
            2.0 * quad(lambda rho: rho**2 * np.exp(-0.5 * rho**2) * 2.0 * rho ** (g + 2.0),
                       0.0, _RHO_PAD)[0] / _SQRT_2PI
        )
        return lam1, 0.5 * (tr - lam1)

    def f1(rho: float) -> float:
        return rho**4 * np.exp(-0.5 * rho**2) * _angular_j1(r, rho, g)

    def f0(rho: float) -> float:
        return rho**2 * np.exp(-0.5 * rho**2) * _angular_j0(r, rho, g)

    # split at rho = r where the integrand has limited smoothness
    lam1 = (quad(f1, 0.0, r)[0] + quad(f1, r, r + _RHO_PAD)[0]) / _SQRT_2PI
    tr = 2.0 * (quad(f0, 0.0, r)[0] + quad(f0, r, r + _RHO_PAD)[0]) / _SQRT_2PI
    return lam1, 0.5 * (tr - lam1)


@dataclass
class CoeffProfile:
    """Radial profile of the diffusion eigenvalues with spline interpolants."""

    gamma: float
    radii: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    fitted_c1: float
    fitted_c2: float
    _spline1: CubicSpline
    _spline2: CubicSpline

    def eval_lambda1(self, r) -> np.ndarray:
        return self._spline1(np.clip(r, self.radii[0], self.radii[-1]))

    def eval_lambda2(self, r) -> np.ndarray:
        return self._spline2(np.clip(r, self.radii[0], self.radii[-1]))


def build_coeff_profile(spec: GridSpec, num_radii: int = 400) -> CoeffProfile:
    """Tabulate lambda1, lambda2 on [0, sqrt(3) R + 1] and fit the tail constants."""
    r_max = np.sqrt(3.0) * spec.radius + 1.0
    radii = np.linspace(0.0, r_max, num_radii)
    lam = np.array([theta_eigs(r, spec.gamma) for r in radii])
    lam1, lam2 = lam[:, 0], lam[:, 1]
    if np.any(lam1 <= 0) or np.any(lam2 <= 0):
        raise ArithmeticError("diffusion eigenvalues must stay positive")

    # large-r fit against c <xi>^p with the exponent pinned to its known value
    top = radii >= 0.75 * r_max
    bracket = 1.0 + radii[top]
    c1 = float(np.exp(np.mean(np.log(lam1[top]) - spec.gamma * np.log(bracket))))
    c2 = float(np.exp(np.mean(np.log(lam2[top]) - (spec.gamma + 2.0) * np.log(bracket))))
    return CoeffProfile(
        gamma=spec.gamma,
        radii=radii,
        lambda1=lam1,
        lambda2=lam2,
        fitted_c1=c1,
        fitted_c2=c2,
        _spline1=CubicSpline(radii, lam1),
        _spline2=CubicSpline(radii, lam2),
    )


def radial_projector(xi: np.ndarray) -> np.ndarray:
    """P(xi) u = (u . xi / |xi|^2) xi, with the convention P(0) = 0."""
    xi = np.asarray(xi, dtype=float)
    r2 = float(xi @ xi)
    if r2 == 0.0:
        return np.zeros((3, 3))
    return np.outer(xi, xi) / r2


def theta_matrix(xi: np.ndarray, profile: CoeffProfile) -> np.ndarray:
    """theta(xi) = lambda1 P(xi) + lambda2 (I - P(xi)); lambda1(0) I at xi = 0."""
    xi = np.asarray(xi, dtype=float)
    r = float(np.linalg.norm(xi))
    if r == 0.0:
        return float(profile.eval_lambda1(0.0)) * np.eye(3)
    P = radial_projector(xi)
    l1 = float(profile.eval_lambda1(r))
    l2 = float(profile.eval_lambda2(r))
    return l1 * P + l2 * (np.eye(3) - P)


def theta_fields(points: np.ndarray, profile: CoeffProfile):
    """Vectorized (lambda1, lambda2, P) at an (N, 3) array of nodes."""
    r = np.linalg.norm(points, axis=1)
    l1 = np.asarray(profile.eval_lambda1(r), dtype=float)
    l2 = np.asarray(profile.eval_lambda2(r), dtype=float)
    P = np.zeros((points.shape[0], 3, 3))
    nz = r > 0
    xhat = points[nz] / r[nz, None]
    P[nz] = xhat[:, :, None] * xhat[:, None, :]
    return l1, l2, P
