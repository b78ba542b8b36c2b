"""Two-tier multi-antenna HetNet rate coverage with offloading and
interference nulling: closed-form analytics and Monte Carlo simulation,
plus optimization of the nulling budget and baseline schemes.
"""

from .analytics import (
    CoverageBreakdown,
    asymptotic_order_slopes,
    conditional_coverage,
    delta_rate_coverage,
    rate_coverage_exact,
    rate_coverage_mla,
    sir_threshold,
)
from .association import (
    AssociationStats,
    active_offloaded_pmf,
    active_offloaded_seen_pmf,
    association_probabilities,
    association_stats,
    in_dof_pmf,
    in_selection_probability,
    joint_distance_density,
    load_pmf,
    mean_load,
    serving_distance_density,
)
from .config import (
    MACRO,
    PICO,
    NetworkConfig,
    TierParams,
    UserClass,
    db_to_linear,
    linear_to_db,
)
from .errors import ConfigError, InsufficientWindowError, NumericalAccuracyError
from .optimizer import (
    AsymptoticCheck,
    BiasSweepResult,
    OptimizationResult,
    bias_sweep,
    optimal_abs_fraction,
    optimal_in_dof,
    verify_asymptotic_optimum,
)
from .simulator import (
    AssociationRealization,
    CoverageReport,
    Deployment,
    SchemeSpec,
    SlotSchedule,
    TrialRecords,
    associate_and_classify,
    class_frequencies,
    coverage_report,
    estimate_rate_coverage,
    sample_deployment,
    simulate_records,
    zfbf_precoder,
)
from .special_math import (
    compositions3,
    incomplete_beta,
    integer_partitions,
    laplace_derivative_scaled,
    laplace_derivative_stack,
    laplace_interference,
)

__version__ = "0.1.0"

__all__ = [
    "AssociationRealization",
    "AssociationStats",
    "AsymptoticCheck",
    "BiasSweepResult",
    "ConfigError",
    "CoverageBreakdown",
    "CoverageReport",
    "Deployment",
    "InsufficientWindowError",
    "MACRO",
    "NetworkConfig",
    "NumericalAccuracyError",
    "OptimizationResult",
    "PICO",
    "SchemeSpec",
    "SlotSchedule",
    "TierParams",
    "TrialRecords",
    "UserClass",
    "active_offloaded_pmf",
    "active_offloaded_seen_pmf",
    "associate_and_classify",
    "association_probabilities",
    "association_stats",
    "asymptotic_order_slopes",
    "bias_sweep",
    "class_frequencies",
    "compositions3",
    "conditional_coverage",
    "coverage_report",
    "db_to_linear",
    "delta_rate_coverage",
    "estimate_rate_coverage",
    "in_dof_pmf",
    "in_selection_probability",
    "incomplete_beta",
    "integer_partitions",
    "joint_distance_density",
    "laplace_derivative_scaled",
    "laplace_derivative_stack",
    "laplace_interference",
    "linear_to_db",
    "load_pmf",
    "mean_load",
    "optimal_abs_fraction",
    "optimal_in_dof",
    "rate_coverage_exact",
    "rate_coverage_mla",
    "sample_deployment",
    "serving_distance_density",
    "simulate_records",
    "sir_threshold",
    "verify_asymptotic_optimum",
    "zfbf_precoder",
    "__version__",
]
