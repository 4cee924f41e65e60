"""Finite-key secret key rates for entanglement-based BB84 and six-state QKD
with trusted preprocessing noise."""

__version__ = "0.1.0"

from .keyrate import (
    RateBreakdown,
    SecurityBudget,
    asymptotic_rate,
    finite_rate,
    worst_case,
)
from .linalg import (
    DensityOperator,
    binary_entropy,
    conditional_vn_entropy,
    hermitian_eigenvalues,
    partial_trace,
    shannon_cond_entropy,
    von_neumann_entropy,
)
from .optimizer import (
    N0Result,
    NoKeyError,
    OptimizationConfig,
    SweepParams,
    disturbance_threshold,
    find_N0,
    noise_onset,
    optimal_noise,
    optimize_rate,
    sweep,
)
from .states import (
    AttackSpec,
    CcqState,
    InfeasibleAttackError,
    NoiseConfig,
    Protocol,
    Scenario,
    depolarize,
    eve_gram,
    probes_from_gram,
    scenario_ccq,
    scenario_state,
)

__all__ = [
    "AttackSpec", "CcqState", "DensityOperator", "InfeasibleAttackError", "N0Result", "NoKeyError",
    "NoiseConfig", "OptimizationConfig", "Protocol", "RateBreakdown", "Scenario", "SecurityBudget",
    "SweepParams", "asymptotic_rate", "binary_entropy", "conditional_vn_entropy", "depolarize",
    "disturbance_threshold", "eve_gram", "find_N0", "finite_rate", "hermitian_eigenvalues",
    "noise_onset", "optimal_noise", "optimize_rate", "partial_trace", "probes_from_gram",
    "scenario_ccq", "scenario_state", "shannon_cond_entropy", "sweep", "von_neumann_entropy",
    "worst_case",
]
