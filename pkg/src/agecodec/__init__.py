"""Prefix-free source codes for timely updates and low queuing delay."""

from .age import (
    RandomizedScheme,
    age_bounds,
    average_age,
    average_age_erasure,
    average_age_erasure_exact,
    average_age_randomized,
    average_delay,
)
from .codec import (
    CodeBook,
    LengthAssignment,
    canonical_code,
    kraft_sum,
    round_up,
    shannon_lengths,
)
from .pmf import Pmf, entropy, kl_divergence, new_pmf, uniform, zipf
from .sim import SimConfig, SimReport, renewal_identities, simulate_mg1, simulate_update
from .solver import (
    OptResult,
    SolverOptions,
    direct_oracle,
    saddle_check,
    solve_age,
    solve_delay,
)

__all__ = [
    "Pmf", "new_pmf", "uniform", "zipf", "entropy", "kl_divergence",
    "LengthAssignment", "CodeBook", "kraft_sum", "shannon_lengths", "round_up", "canonical_code",
    "RandomizedScheme", "average_age", "average_age_randomized", "average_age_erasure",
    "average_age_erasure_exact", "age_bounds", "average_delay",
    "SolverOptions", "OptResult", "solve_age", "solve_delay", "direct_oracle", "saddle_check",
    "SimConfig", "SimReport", "simulate_update", "simulate_mg1", "renewal_identities",
]
