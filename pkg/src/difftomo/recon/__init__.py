"""Reconstruction: alternating projections, exact tomography and phase unwrapping."""
from .ap import ReconReport, ap_reconstruct, magnitude_projection, stack_magnitudes, write_report_csv
from .metrics import correlation, sector_bound, sector_bound_union
from .operator import MeasurementOperator, build_forward
from .tomography import DiversityError, vandermonde_tomography
from .unwrap import UnwrapError, UnwrapResult, itoh_margin, unwrap_tilt_series, wrap, wrap_projections

__all__ = [
    "ReconReport",
    "ap_reconstruct",
    "magnitude_projection",
    "stack_magnitudes",
    "write_report_csv",
    "correlation",
    "sector_bound",
    "sector_bound_union",
    "MeasurementOperator",
    "build_forward",
    "DiversityError",
    "vandermonde_tomography",
    "UnwrapError",
    "UnwrapResult",
    "itoh_margin",
    "unwrap_tilt_series",
    "wrap",
    "wrap_projections",
]
