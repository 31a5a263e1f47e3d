"""Problem instances, placement vectors, the closed-form optimal placement, and rate evaluators.

All quantities are exact :class:`fractions.Fraction` values. Floats are only
produced by :func:`round_half_up` for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Tuple, Union

from .combinatorics import binom, distinct_distribution, expected_distinct

RationalLike = Union[int, Fraction, str]


def to_rational(value: RationalLike) -> Fraction:
    """Exact conversion of an int, Fraction, ``"p/q"`` or decimal string.

    Floats are rejected: their binary expansion is rarely the value the
    caller meant (``0.1`` is not 1/10).
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse {value!r} as a rational number") from exc
    raise TypeError(f"expected int, Fraction or string, got {type(value).__name__}")


@dataclass(frozen=True)
class ProblemInstance:
    """N files, K users, each user caching M file-units (0 <= M <= N)."""

    N: int
    K: int
    M: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "M", to_rational(self.M))
        if self.N < 1 or self.K < 1:
            raise ValueError(f"need N >= 1 and K >= 1, got N={self.N}, K={self.K}")
        if not 0 <= self.M <= self.N:
            raise ValueError(f"cache size M={self.M} outside [0, {self.N}]")

    @property
    def mu(self) -> Fraction:
        return self.M / self.N

    def __str__(self) -> str:
        return f"(N={self.N}, K={self.K}, M={self.M})"


@dataclass(frozen=True)
class PlacementVector:
    """Subfile-size fractions a_0..a_K; a_l applies to every subset of l users."""

    a: Tuple[Fraction, ...]

    def __init__(self, values: Iterable[RationalLike]):
        object.__setattr__(self, "a", tuple(to_rational(v) for v in values))

    def __len__(self) -> int:
        return len(self.a)

    def __getitem__(self, l: int) -> Fraction:
        return self.a[l]

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.a)

    @property
    def K(self) -> int:
        return len(self.a) - 1

    def support(self) -> List[int]:
        return [l for l, v in enumerate(self.a) if v != 0]

    def cache_usage(self) -> Fraction:
        """Fraction of each file a user stores: sum over l >= 1 of C(K-1, l-1) a_l."""
        K = self.K
        return sum((binom(K - 1, l - 1) * v for l, v in enumerate(self.a) if l >= 1), Fraction(0))

    def partition_total(self) -> Fraction:
        K = self.K
        return sum((binom(K, l) * v for l, v in enumerate(self.a)), Fraction(0))

    def __str__(self) -> str:
        return "[" + ", ".join(str(v) for v in self.a) + "]"


@dataclass
class FeasibilityReport:
    feasible: bool
    violations: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.feasible


def _require_length(inst: ProblemInstance, a: PlacementVector) -> None:
    if len(a) != inst.K + 1:
        raise ValueError(f"placement vector has length {len(a)}, expected K+1={inst.K + 1}")


def check_feasible(inst: ProblemInstance, a: PlacementVector) -> FeasibilityReport:
    """Exact check of the partition equality, the cache budget, and 0 <= a_l <= 1."""
    _require_length(inst, a)
    violations = []
    total = a.partition_total()
    if total != 1:
        violations.append(f"partition: sum C(K,l) a_l = {total} != 1")
    usage = a.cache_usage()
    if usage > inst.mu:
        violations.append(f"cache: sum C(K-1,l-1) a_l = {usage} > mu = {inst.mu}")
    for l, v in enumerate(a):
        if v < 0 or v > 1:
            violations.append(f"bounds: a_{l} = {v} outside [0, 1]")
    return FeasibilityReport(not violations, violations)


def critical_index(inst: ProblemInstance) -> int:
    """The integer l* with mu K - 1 <= l* < mu K (defined for mu > 0)."""
    muK = inst.mu * inst.K
    if muK <= 0:
        raise ValueError("critical index undefined for an empty cache")
    return math.ceil(muK) - 1


def optimal_placement(inst: ProblemInstance) -> PlacementVector:
    """Closed-form minimiser of the expected MCCS rate.

    The file is split across the two adjacent subgroups l* and l*+1 straddling
    mu K; when mu K is an integer the l* share is exactly zero.
    """
    K, mu = inst.K, inst.mu
    a = [Fraction(0)] * (K + 1)
    if mu == 0:
        a[0] = Fraction(1)
    elif mu == 1:
        a[K] = Fraction(1)
    else:
        muK = mu * K
        l = critical_index(inst)
        a[l] = (l + 1 - muK) / binom(K, l)
        a[l + 1] = (muK - l) / binom(K, l + 1)
    return PlacementVector(a)


def _check_distinct(inst: ProblemInstance, n_distinct: int) -> None:
    if not 1 <= n_distinct <= min(inst.N, inst.K):
        raise ValueError(
            f"number of distinct requests must lie in [1, {min(inst.N, inst.K)}], got {n_distinct}"
        )


def per_demand_rate(inst: ProblemInstance, a: PlacementVector, n_distinct: int) -> Fraction:
    """Delivered load for a demand with ``n_distinct`` distinct files.

    Sum over l < K of [C(K, l+1) - C(K - n, l+1)] a_l: one message of size a_l
    for every (l+1)-subset that meets the leader group.
    """
    _require_length(inst, a)
    _check_distinct(inst, n_distinct)
    K = inst.K
    return sum(
        ((binom(K, l + 1) - binom(K - n_distinct, l + 1)) * a[l] for l in range(K)),
        Fraction(0),
    )


def expected_rate(inst: ProblemInstance, a: PlacementVector) -> Fraction:
    """Expected load under uniform demands, weighting per-demand rates by the Stirling law."""
    report = check_feasible(inst, a)
    if not report:
        raise ValueError(f"infeasible placement for {inst}: " + "; ".join(report.violations))
    dist = distinct_distribution(inst.N, inst.K)
    return sum(
        (p * per_demand_rate(inst, a, n) for n, p in dist.probabilities.items()),
        Fraction(0),
    )


def minimum_expected_rate(inst: ProblemInstance) -> Fraction:
    """Optimal expected rate evaluated straight from l*, mu, K and N."""
    K, mu = inst.K, inst.mu
    if mu == 0:
        return expected_distinct(inst.N, K)
    if mu == 1:
        return Fraction(0)
    muK = mu * K
    l = critical_index(inst)
    lower = (l + 1 - muK) / binom(K, l)
    upper = (muK - l) / binom(K, l + 1)
    total = Fraction(0)
    for n, p in distinct_distribution(inst.N, K).probabilities.items():
        total += p * (
            (binom(K, l + 1) - binom(K - n, l + 1)) * lower
            + (binom(K, l + 2) - binom(K - n, l + 2)) * upper
        )
    return total


def peak_rate_ccs(K: int, a: PlacementVector) -> Fraction:
    """Rate of plain coded caching: every (l+1)-subset gets a message, whatever the demand."""
    if len(a) != K + 1:
        raise ValueError(f"placement vector has length {len(a)}, expected K+1={K + 1}")
    return sum((binom(K, l + 1) * a[l] for l in range(K)), Fraction(0))


def peak_rate_mccs(inst: ProblemInstance, a: PlacementVector) -> Fraction:
    return per_demand_rate(inst, a, min(inst.N, inst.K))


# Labels for the three redundancy regimes of the two-subgroup optimum.
BOTH_LEVELS_REDUNDANT = "redundant-both-levels"
LOWER_LEVEL_REDUNDANT = "redundant-lower-level-only"
NO_REDUNDANCY = "no-redundancy"


def case_rate_breakdown(inst: ProblemInstance, n_distinct: int) -> Tuple[Fraction, str]:
    """Per-demand rate of the optimal placement, evaluated by redundancy regime.

    With the optimum supported on {l*, l*+1}, K - n >= l*+2 leaves redundant
    subsets at both levels, K - n = l*+1 only at level l*, and K - n < l*+1 at
    neither. Each regime has its own closed form; all must agree with
    :func:`per_demand_rate`.
    """
    _check_distinct(inst, n_distinct)
    if not 0 < inst.mu < 1:
        raise ValueError("redundancy regimes are defined for 0 < mu < 1")
    K, muK = inst.K, inst.mu * inst.K
    l = critical_index(inst)
    lower = (l + 1 - muK) / binom(K, l)
    upper = (muK - l) / binom(K, l + 1)
    spare = K - n_distinct
    if spare >= l + 2:
        rate = (binom(K, l + 1) - binom(spare, l + 1)) * lower + (
            binom(K, l + 2) - binom(spare, l + 2)
        ) * upper
        return rate, BOTH_LEVELS_REDUNDANT
    if spare == l + 1:
        rate = (binom(K, l + 1) - binom(spare, l + 1)) * lower + binom(K, l + 2) * upper
        return rate, LOWER_LEVEL_REDUNDANT
    rate = binom(K, l + 1) * lower + binom(K, l + 2) * upper
    return rate, NO_REDUNDANCY


@dataclass(frozen=True)
class RateReport:
    expected_rate: Fraction
    peak_rate_mccs: Fraction
    peak_rate_ccs: Fraction
    per_distinct_rates: Dict[int, Fraction]


def rate_report(inst: ProblemInstance, a: PlacementVector) -> RateReport:
    per = {n: per_demand_rate(inst, a, n) for n in range(1, min(inst.N, inst.K) + 1)}
    return RateReport(
        expected_rate=expected_rate(inst, a),
        peak_rate_mccs=per[min(inst.N, inst.K)],
        peak_rate_ccs=peak_rate_ccs(inst.K, a),
        per_distinct_rates=per,
    )


def round_half_up(value: Fraction, places: int = 3) -> Decimal:
    """Round an exact rational to ``places`` decimals, ties away from zero."""
    if places < 0:
        raise ValueError("places must be non-negative")
    value = Fraction(value)
    scale = 10**places
    scaled = abs(value) * scale
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r >= scaled.denominator:
        q += 1
    sign = "-" if value < 0 and q else ""
    return Decimal(f"{sign}{q}").scaleb(-places).quantize(Decimal(1).scaleb(-places))


def format_decimal(value: Fraction, places: int = 3) -> str:
    """Half-up rounded rendering with trailing zeros trimmed to one decimal digit (``0.25``, ``1.0``)."""
    text = f"{round_half_up(value, places):f}"
    if "." in text:
        text = text.rstrip("0")
        if text.endswith("."):
            text += "0"
    return text


def format_fraction(value: Fraction) -> str:
    value = Fraction(value)
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def single_subgroup_rate(K: int, level: int, n_distinct: int) -> Fraction:
    """Per-demand rate of equal partitioning at one level, in product form.

    (K-l)/(l+1) * (1 - prod_{i<n} (K-l-1-i)/(K-i)); the ratio is
    C(K-n, l+1)/C(K, l+1) written as falling factorials. Kept as an
    independent cross-check of the binomial rate formula.
    """
    head = Fraction(K - level, level + 1)
    if K - n_distinct < level + 1:
        return head
    ratio = Fraction(1)
    for i in range(n_distinct):
        ratio *= Fraction(K - level - 1 - i, K - i)
    return head * (1 - ratio)

