"""Brownian Cox-process order-flow simulation and efficient-price estimation."""

from .model import (
    ModelParams,
    ResponseFunction,
    SimulationRecord,
    ergodic_average,
    fractional_part,
    path_value,
    simulate,
)
from .estimation import (
    EstimationResult,
    EventStream,
    bin_counts,
    check_regime,
    estimate,
    estimate_h,
    estimate_h_inverse,
    estimate_hyt,
    estimate_mu,
    estimate_yt,
)
from .cycles import (
    CycleSample,
    CycleStatistics,
    cycle_statistics,
    laplace_check,
    sample_cycle,
)
from .limits import (
    clt_verify_h,
    clt_verify_hinv,
    clt_verify_mu,
    clt_verify_yt,
    corollary_variance,
    rmse_ratio_check,
    simulate_window_counts,
    theorem1_variance,
    theorem2_variance,
)

__version__ = "0.1.0"
