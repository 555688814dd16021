"""Microhub meal-delivery modelling kit: analytic model, tour solvers, simulator and design search."""

__version__ = "0.1.0"

from .ca_model import (  # noqa: E402
    PAPER_REFERENCE_PARAMS,
    RECALIBRATED_PARAMS,
    AnalyticMetrics,
    DesignChoice,
    MarketScenario,
    VarianceParams,
    total_wait,
    tsppd_benchmark,
)
from .optimizer import DesignSearchSpec, evaluate_design, solve_design  # noqa: E402
from .simulator import SimConfig, run_simulation  # noqa: E402

__all__ = [
    "AnalyticMetrics",
    "DesignChoice",
    "DesignSearchSpec",
    "MarketScenario",
    "PAPER_REFERENCE_PARAMS",
    "RECALIBRATED_PARAMS",
    "SimConfig",
    "VarianceParams",
    "evaluate_design",
    "run_simulation",
    "solve_design",
    "total_wait",
    "tsppd_benchmark",
]
