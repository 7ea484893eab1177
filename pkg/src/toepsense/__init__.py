"""Symmetric Toeplitz structured sensing toolkit."""

__version__ = "0.1.0"

from .operators import (
    MeasurementOperator,
    build_D,
    build_L,
    build_operator,
    column_norm_expectation_check,
)
from .randgen import (
    DistributionSpec,
    EntryStream,
    SeedSpec,
    draw_rademacher_spikes,
    draw_sequence,
)
from .recovery import (
    RecoveryResult,
    SolverConfig,
    basis_pursuit,
    judge_success,
    mse_frobenius,
    omp,
)
from .signals import SparseSignal

__all__ = [
    "MeasurementOperator",
    "DistributionSpec",
    "SeedSpec",
    "EntryStream",
    "SparseSignal",
    "SolverConfig",
    "RecoveryResult",
    "build_operator",
    "build_L",
    "build_D",
    "column_norm_expectation_check",
    "draw_sequence",
    "draw_rademacher_spikes",
    "basis_pursuit",
    "omp",
    "judge_success",
    "mse_frobenius",
    "__version__",
]
