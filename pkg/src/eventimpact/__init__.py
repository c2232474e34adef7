"""Estimate the excess productivity and duration that a known external event
induces in a daily event-count series, using a nonparametric self-exciting
point process with a three-period productivity step."""

from .catalog import (
    DailyCountSeries,
    DataError,
    StudyWindow,
    aggregate_excluding,
    ingest_cumulative,
    slice_window,
)
from .duration import (
    DurationScan,
    GuardResult,
    ScanOptions,
    first_maximum,
    loess_smooth,
    pre_post_guard,
    scan_durations,
    welch_t_test,
)
from .impact import (
    ImpactOptions,
    ImpactReport,
    Outcome,
    classify,
    compute_kappa,
    excess_cases,
    run_pipeline,
)
from .misd import (
    FitOptions,
    FitResult,
    ProductivityStep,
    ResponsibilityMatrix,
    TriggeringHistogram,
    ZeroIntensityError,
    conditional_intensity,
    e_step,
    fit,
    log_likelihood,
    m_step,
)
from .simulator import EventTimes, SimConfig, bin_to_days, generate_study, simulate
from .study import run_study

__version__ = "0.1.0"

__all__ = [
    "DailyCountSeries",
    "DataError",
    "StudyWindow",
    "aggregate_excluding",
    "ingest_cumulative",
    "slice_window",
    "DurationScan",
    "GuardResult",
    "ScanOptions",
    "first_maximum",
    "loess_smooth",
    "pre_post_guard",
    "scan_durations",
    "welch_t_test",
    "ImpactOptions",
    "ImpactReport",
    "Outcome",
    "classify",
    "compute_kappa",
    "excess_cases",
    "run_pipeline",
    "FitOptions",
    "FitResult",
    "ProductivityStep",
    "ResponsibilityMatrix",
    "TriggeringHistogram",
    "ZeroIntensityError",
    "conditional_intensity",
    "e_step",
    "fit",
    "log_likelihood",
    "m_step",
    "EventTimes",
    "SimConfig",
    "bin_to_days",
    "generate_study",
    "simulate",
    "run_study",
]
