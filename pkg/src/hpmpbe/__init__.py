"""Homotopy-perturbation series for breakage and aggregation population balances."""
from .core import (
    MAX_ORDER,
    AggregationKernel,
    BreakageKernel,
    DistributionField,
    DomainError,
    Grid,
    GridError,
    HPMError,
    InitialCondition,
    KernelKindError,
    Scenario,
    SeriesTerm,
    UnsupportedOrderError,
    aligned_grid,
    make_grid,
)
from .engine import ConvergenceWarning, SeriesState, build_series, evaluate_series
from .oracle import GelationError, StiffnessError, solve_direct

__version__ = "0.1.0"

__all__ = [
    "MAX_ORDER", "AggregationKernel", "BreakageKernel", "DistributionField", "DomainError", "Grid",
    "GridError", "HPMError", "InitialCondition", "KernelKindError", "Scenario", "SeriesTerm",
    "UnsupportedOrderError", "aligned_grid", "make_grid", "ConvergenceWarning", "SeriesState",
    "build_series", "evaluate_series", "GelationError", "StiffnessError", "solve_direct",
]
