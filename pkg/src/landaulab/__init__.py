"""Spectral and semigroup toolkit for a linearized collision operator.

The package assembles the operator on a truncated velocity lattice, traces its
low-lying dispersion branches, splits mode solutions into fluid/kinetic/
remainder buckets, integrates the iterated-Duhamel expansion chain, and runs a
staged verification suite over all of it.
"""

from .grid import GridSpec, VelocityGrid, build_grid, weighted_inner
from .coeffs import CoeffProfile, build_coeff_profile, theta_eigs, theta_matrix
from .collision import (
    CollisionOperators,
    assemble_collision,
    ktilde_kernel,
    singular_norm_scan,
)
from .mode import PHASE_BETA, EigenSystem, ModeOperator, Trajectory, mode_operator
from .spectral import (
    BranchFit,
    BranchSet,
    GapEstimate,
    classify_regime,
    estimate_gap,
    euler_moment_oracle,
    fit_dispersion,
    trace_branches,
)
from .green import (
    DecompositionSnapshot,
    ModeField,
    fluid_norm_series,
    green_snapshot_series,
    parseval_norm,
    prepare_initial,
    synthesize_green,
)
from .kinetic import (
    MixtureTrajectory,
    PicardChain,
    damped_commutator_envelope,
    dt_commutator_check,
    mixture_apply,
    picard_chain,
)
from .harness import (
    DEFAULT_CONFIG,
    CheckResult,
    ConfigError,
    DecayFit,
    fit_decay,
    load_config,
    run_suite,
    upper_envelope,
)

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "VelocityGrid",
    "build_grid",
    "weighted_inner",
    "CoeffProfile",
    "build_coeff_profile",
    "theta_eigs",
    "theta_matrix",
    "CollisionOperators",
    "assemble_collision",
    "ktilde_kernel",
    "singular_norm_scan",
    "PHASE_BETA",
    "EigenSystem",
    "ModeOperator",
    "Trajectory",
    "mode_operator",
    "BranchFit",
    "BranchSet",
    "GapEstimate",
    "classify_regime",
    "estimate_gap",
    "euler_moment_oracle",
    "fit_dispersion",
    "trace_branches",
    "DecompositionSnapshot",
    "ModeField",
    "fluid_norm_series",
    "green_snapshot_series",
    "parseval_norm",
    "prepare_initial",
    "synthesize_green",
    "MixtureTrajectory",
    "PicardChain",
    "damped_commutator_envelope",
    "dt_commutator_check",
    "mixture_apply",
    "picard_chain",
    "DEFAULT_CONFIG",
    "CheckResult",
    "ConfigError",
    "DecayFit",
    "fit_decay",
    "load_config",
    "run_suite",
    "upper_envelope",
]
