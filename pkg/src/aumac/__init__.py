"""Finite-blocklength PUPE bounds for the asynchronous unsourced MAC."""

from .config import BudgetError, InfeasiblePointError, SystemConfig
from .bound import BoundBreakdown, SearchSettings, evaluate_bound

__all__ = [
    "BudgetError",
    "InfeasiblePointError",
    "SystemConfig",
    "BoundBreakdown",
    "SearchSettings",
    "evaluate_bound",
]

__version__ = "0.1.0"
