"""Mean cumulative function metrics for censored player event logs."""

from .comparison import (
    DifferenceCurve,
    TestResult,
    chi_square_sf,
    k_sample_bonferroni,
    mcf_difference,
    score_test,
    two_sample_test,
)
from .events import (
    CohortSample,
    CostStream,
    EventKind,
    EventRecord,
    PlayerCosts,
    PlayerHistory,
    validate_history,
)
from .ingestion import IngestOptions, parse_cohorts, parse_duration, parse_events_csv, parse_money
from .mcf import McfCurve, compute_mcf, evaluate, merge_at_common_grid
from .simulation import SimParams, analytic_mean, simulate_cohort
from .transforms import (
    MetricKind,
    RetentionMode,
    RetentionTable,
    daily_rate,
    distinct_days_costs,
    mcf_for_metric,
    retention_table,
    to_cost_stream,
)

__version__ = "0.1.0"

__all__ = [
    "CohortSample",
    "CostStream",
    "DifferenceCurve",
    "EventKind",
    "EventRecord",
    "IngestOptions",
    "McfCurve",
    "MetricKind",
    "PlayerCosts",
    "PlayerHistory",
    "RetentionMode",
    "RetentionTable",
    "SimParams",
    "TestResult",
    "analytic_mean",
    "chi_square_sf",
    "compute_mcf",
    "daily_rate",
    "distinct_days_costs",
    "evaluate",
    "k_sample_bonferroni",
    "mcf_difference",
    "mcf_for_metric",
    "merge_at_common_grid",
    "parse_cohorts",
    "parse_duration",
    "parse_events_csv",
    "parse_money",
    "retention_table",
    "score_test",
    "simulate_cohort",
    "to_cost_stream",
    "two_sample_test",
    "validate_history",
]
