"""Robust per-environment Gaussian error models."""

from railgnss.errormodel.mcd import (
    McdResult,
    MinCovDet,
    consistency_factor,
    fast_mcd,
    mcd_exact,
    min_subset_size,
    reweight,
)
from railgnss.errormodel.models import (
    ErrorModelSet,
    GaussianErrorModel,
    ScheduleEntry,
    fit_error_models,
    fit_gaussian,
    histogram_rows,
    read_schedule,
    sample_errors,
    schedule_from_journey,
    write_schedule,
    write_stream,
)

__all__ = [
    "ErrorModelSet", "GaussianErrorModel", "McdResult", "MinCovDet", "ScheduleEntry",
    "consistency_factor", "fast_mcd", "fit_error_models", "fit_gaussian", "histogram_rows",
    "mcd_exact", "min_subset_size", "read_schedule", "reweight", "sample_errors",
    "schedule_from_journey", "write_schedule", "write_stream",
]
