"""Optimal cache placement for coded caching with redundancy-aware delivery.

Exact closed-form placement, rate evaluation under uniform random demands,
and three independent oracles: an exact rational simplex, exhaustive demand
enumeration, and a bit-exact delivery simulator with GF(2) decodability checks.
"""

__version__ = "0.1.0"

from .combinatorics import binom, distinct_count, distinct_distribution, prob_distinct, stirling2
from .placement import (
    PlacementVector,
    ProblemInstance,
    case_rate_breakdown,
    check_feasible,
    expected_rate,
    minimum_expected_rate,
    optimal_placement,
    peak_rate_ccs,
    peak_rate_mccs,
    per_demand_rate,
)

__all__ = [
    "PlacementVector",
    "ProblemInstance",
    "binom",
    "case_rate_breakdown",
    "check_feasible",
    "distinct_count",
    "distinct_distribution",
    "expected_rate",
    "minimum_expected_rate",
    "optimal_placement",
    "peak_rate_ccs",
    "peak_rate_mccs",
    "per_demand_rate",
    "prob_distinct",
    "stirling2",
]
