"""Age-of-Information analysis for the multi-stream M/G/1/1 preemptive queue."""

from .analytic import (
    AgeReport,
    SystemConfig,
    age_report,
    avg_age,
    peak_age,
)
from .distributions import (
    Deterministic,
    Exponential,
    Gamma,
    ServiceDistribution,
    Uniform,
)
from .optimizer import optimal_allocation, priority_frontier, total_age
from .simulator import SimParams, SimResult, run

__all__ = [
    "AgeReport",
    "SystemConfig",
    "age_report",
    "avg_age",
    "peak_age",
    "Deterministic",
    "Exponential",
    "Gamma",
    "ServiceDistribution",
    "Uniform",
    "optimal_allocation",
    "priority_frontier",
    "total_age",
    "SimParams",
    "SimResult",
    "run",
]
