"""Quenched machinery for recurrent one-dimensional random walks in random environment."""

__version__ = "0.1.0"

from .errors import (
    ArgumentError,
    BudgetExceededError,
    InsufficientDataError,
    InvalidLawError,
    PreconditionError,
    RangeError,
    ValleywalkError,
    WindowExhaustedError,
)
from .env_model import (
    DEFAULT_LAW,
    Environment,
    LawReport,
    SiteLaw,
    extend_environment,
    sample_environment,
    validate_law,
)
from .potential import (
    Potential,
    ValleyStats,
    compute_potential,
    conductance,
    find_valleys,
    gamma_membership,
    measure,
    valley_stats,
)
from .exact_kernel import (
    ABSORBING,
    MassProfile,
    Reflecting,
    ReturnSeries,
    hitting_prob_formula,
    hitting_prob_solve,
    propagate,
    return_series,
)
from .bounds import (
    BoundReport,
    CertificateReport,
    check_confinement,
    check_exit_bounds,
    lem3_check,
    prop1_certificate,
    staircase_environment,
)
from .diagnostics import (
    ahat_density,
    exponent_process,
    partial_sums,
    srw_return,
    valley_block_bound,
)
from .montecarlo import SimResult, SimSpec, compare_exact, simulate, simulate_jumps, tau_increment_stats

__all__ = [
    "ABSORBING",
    "ahat_density",
    "ArgumentError",
    "BoundReport",
    "BudgetExceededError",
    "CertificateReport",
    "check_confinement",
    "check_exit_bounds",
    "compare_exact",
    "compute_potential",
    "conductance",
    "DEFAULT_LAW",
    "Environment",
    "exponent_process",
    "extend_environment",
    "find_valleys",
    "gamma_membership",
    "hitting_prob_formula",
    "hitting_prob_solve",
    "InsufficientDataError",
    "InvalidLawError",
    "LawReport",
    "lem3_check",
    "MassProfile",
    "measure",
    "partial_sums",
    "Potential",
    "PreconditionError",
    "prop1_certificate",
    "propagate",
    "RangeError",
    "Reflecting",
    "return_series",
    "ReturnSeries",
    "sample_environment",
    "SimResult",
    "SimSpec",
    "simulate",
    "simulate_jumps",
    "SiteLaw",
    "srw_return",
    "staircase_environment",
    "tau_increment_stats",
    "validate_law",
    "valley_block_bound",
    "valley_stats",
    "ValleyStats",
    "ValleywalkError",
    "WindowExhaustedError",
]
