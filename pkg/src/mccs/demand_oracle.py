"""Ground-truth rates by brute force over demand vectors, plus a Monte Carlo estimator."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .combinatorics import DistinctRequestDistribution
from .placement import PlacementVector, ProblemInstance, check_feasible, per_demand_rate

DEFAULT_CAP = 10**7


class EnumerationCapExceeded(ValueError):
    pass


def _check_cap(N: int, K: int, cap: int) -> None:
    if N < 1 or K < 1:
        raise ValueError(f"need N >= 1 and K >= 1, got N={N}, K={K}")
    if N**K > cap:
        raise EnumerationCapExceeded(
            f"{N}^{K} = {N**K} demand vectors exceeds the enumeration cap {cap}; "
            "use monte_carlo_expected_rate instead or raise the cap"
        )


def demand_at(N: int, K: int, index: int) -> Tuple[int, ...]:
    """The ``index``-th demand in mixed-radix order (user K varies fastest)."""
    digits = [0] * K
    for pos in range(K - 1, -1, -1):
        index, digits[pos] = divmod(index, N)
    return tuple(d + 1 for d in digits)


def iter_demands(N: int, K: int, start: int = 0, stop: Optional[int] = None) -> Iterator[Tuple[int, ...]]:
    total = N**K
    stop = total if stop is None else min(stop, total)
    if start == 0 and stop == total:
        yield from itertools.product(range(1, N + 1), repeat=K)
        return
    for i in range(start, stop):
        yield demand_at(N, K, i)


def distinct_counts(N: int, K: int, start: int = 0, stop: Optional[int] = None) -> Counter:
    """Histogram of the number of distinct files over a slice of the demand space."""
    return Counter(len(set(d)) for d in iter_demands(N, K, start, stop))


def _chunked_counts(N: int, K: int, chunks: int) -> Counter:
    total = N**K
    chunks = max(1, min(chunks, total))
    bounds = [total * i // chunks for i in range(chunks + 1)]
    merged: Counter = Counter()
    for lo, hi in zip(bounds, bounds[1:]):
        merged.update(distinct_counts(N, K, lo, hi))
    return merged


def enumerate_distinct_distribution(
    N: int, K: int, cap: int = DEFAULT_CAP, chunks: int = 1
) -> DistinctRequestDistribution:
    """Exact law of the number of distinct requests, by counting all N^K demands."""
    _check_cap(N, K, cap)
    counts = _chunked_counts(N, K, chunks)
    total = N**K
    return DistinctRequestDistribution(N, K, {n: Fraction(c, total) for n, c in sorted(counts.items())})


def enumerate_expected_rate(
    inst: ProblemInstance, a: PlacementVector, cap: int = DEFAULT_CAP, chunks: int = 1
) -> Fraction:
    """Average of the per-demand rate over every demand vector, exactly."""
    _check_cap(inst.N, inst.K, cap)
    report = check_feasible(inst, a)
    if not report:
        raise ValueError(f"infeasible placement: {'; '.join(report.violations)}")
    counts = _chunked_counts(inst.N, inst.K, chunks)
    total = sum((c * per_demand_rate(inst, a, n) for n, c in counts.items()), Fraction(0))
    return total / inst.N**inst.K


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    trials: int
    seed: Optional[int]
    generator: str = "numpy.PCG64"


def monte_carlo_expected_rate(
    inst: ProblemInstance, a: PlacementVector, trials: int, seed: Optional[int] = 0
) -> MonteCarloEstimate:
    """Sample mean and standard error of the rate over i.i.d. uniform demands."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    N, K = inst.N, inst.K
    rates: Dict[int, float] = {n: float(per_demand_rate(inst, a, n)) for n in range(1, min(N, K) + 1)}
    lookup = np.zeros(min(N, K) + 1)
    for n, r in rates.items():
        lookup[n] = r
    rng = np.random.Generator(np.random.PCG64(seed))
    demands = np.sort(rng.integers(1, N + 1, size=(trials, K)), axis=1)
    n_distinct = 1 + np.count_nonzero(np.diff(demands, axis=1), axis=1)
    samples = lookup[n_distinct]
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return MonteCarloEstimate(mean, stderr, trials, seed)
