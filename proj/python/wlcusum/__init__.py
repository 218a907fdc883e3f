"""Window-limited CUSUM detectors for parametric changepoint detection."""

from ._core import (
    Detector,
    DomainError,
    ExactCusumDetector,
    GlrDetector,
    InfeasibleWindowError,
    InputError,
    Model,
    NotReadyError,
    ParallelWlcusumDetector,
    RngStream,
    UsageError,
    WlcusumDetector,
    approx_info_numbers,
    calibrate,
    cusum_delay_first_order,
    cusum_maxform_oracle,
    glr_window_stat,
    info_numbers,
    make_detector,
    method_threshold,
    optimal_window,
    overshoot_upper_bound,
    run_cli,
    simulate,
    sweep,
    threshold_parallel,
    threshold_single,
    wadd_upper_bound,
    window_search,
)

__all__ = [name for name in dir() if not name.startswith("_")]
