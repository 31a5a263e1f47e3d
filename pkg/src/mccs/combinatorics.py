"""Exact combinatorial primitives: binomials, Stirling numbers, distinct-request statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Sequence, Tuple


def binom(n: int, k: int) -> int:
    """Binomial coefficient, extended by zero outside ``0 <= k <= n``."""
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


@lru_cache(maxsize=None)
def _stirling_row(n: int) -> Tuple[int, ...]:
    # Iterative build so deep rows do not hit the recursion limit.
    row: Tuple[int, ...] = (1,)
    for m in range(1, n + 1):
        prev = row
        row = tuple(
            (k * prev[k] if k < len(prev) else 0) + (prev[k - 1] if k >= 1 else 0)
            for k in range(m + 1)
        )
    return row


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind S(n, k).

    Counts the partitions of an ``n``-set into ``k`` nonempty blocks, using
    S(n, k) = k S(n-1, k) + S(n-1, k-1) with S(0, 0) = 1.
    """
    if n < 0 or k < 0 or k > n:
        return 0
    return _stirling_row(n)[k]


def prob_distinct(N: int, K: int, n_distinct: int) -> Fraction:
    """Probability that K uniform i.i.d. requests over N files hit exactly ``n_distinct`` files."""
    if N < 1 or K < 1:
        raise ValueError(f"need N >= 1 and K >= 1, got N={N}, K={K}")
    if not 1 <= n_distinct <= min(N, K):
        raise ValueError(
            f"number of distinct requests must lie in [1, {min(N, K)}], got {n_distinct}"
        )
    ways = stirling2(K, n_distinct) * binom(N, n_distinct) * math.factorial(n_distinct)
    return Fraction(ways, N**K)


@dataclass(frozen=True)
class DistinctRequestDistribution:
    N: int
    K: int
    probabilities: Dict[int, Fraction]

    def __post_init__(self) -> None:
        if sum(self.probabilities.values()) != 1:
            raise ValueError("distinct-request probabilities must sum to 1")
        if any(p < 0 or p > 1 for p in self.probabilities.values()):
            raise ValueError("probabilities must lie in [0, 1]")

    def mean(self) -> Fraction:
        return sum((n * p for n, p in self.probabilities.items()), Fraction(0))


@lru_cache(maxsize=None)
def _distribution(N: int, K: int) -> Tuple[Tuple[int, Fraction], ...]:
    return tuple((n, prob_distinct(N, K, n)) for n in range(1, min(N, K) + 1))


def distinct_distribution(N: int, K: int) -> DistinctRequestDistribution:
    """The full law of the number of distinct requests, from the Stirling formula."""
    if N < 1 or K < 1:
        raise ValueError(f"need N >= 1 and K >= 1, got N={N}, K={K}")
    return DistinctRequestDistribution(N, K, dict(_distribution(N, K)))


def expected_distinct(N: int, K: int) -> Fraction:
    return distinct_distribution(N, K).mean()


def distinct_count(demand: Sequence[int]) -> int:
    """Number of distinct file indices in a demand vector."""
    if len(demand) == 0:
        raise ValueError("demand vector must be nonempty")
    return len(set(demand))
