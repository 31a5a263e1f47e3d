"""Cross-oracle verification over parameter grids.

Each check returns a list of :class:`Failure` records naming the witness
instance; an empty list means the check passed. The ``verify`` CLI command
and the acceptance tests both drive these functions.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence

from .combinatorics import binom, distinct_distribution, expected_distinct
from .delivery import (
    DecodingError,
    build_messages,
    cache_occupancy,
    choose_file_size,
    decode_check,
    delivered_load,
    partition_and_cache,
)
from .demand_oracle import distinct_counts
from .lp import OPTIMAL, support_is_adjacent_pair, verify_closed_form
from .placement import (
    PlacementVector,
    ProblemInstance,
    case_rate_breakdown,
    check_feasible,
    expected_rate,
    minimum_expected_rate,
    optimal_placement,
    per_demand_rate,
)


@dataclass
class Failure:
    check: str
    witness: str
    detail: str


@dataclass
class CheckTally:
    name: str
    runs: int = 0
    failures: List[Failure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def cache_grid(N: int, step: Fraction = Fraction(1, 4)) -> List[Fraction]:
    """0, step, 2 step, ..., N."""
    count = Fraction(N) / step
    if count.denominator != 1:
        raise ValueError(f"step {step} does not divide N={N}")
    return [i * step for i in range(int(count) + 1)]


def _w(inst: ProblemInstance, demand: Optional[Sequence[int]] = None) -> str:
    text = f"N={inst.N} K={inst.K} M={inst.M}"
    if demand is not None:
        text += " d=" + ",".join(map(str, demand))
    return text


def check_closed_form_vs_lp(inst: ProblemInstance) -> List[Failure]:
    res = verify_closed_form(inst)
    if res.lp_status != OPTIMAL:
        return [Failure("closed-form-vs-lp", _w(inst), f"LP status {res.lp_status}")]
    if not res.equal:
        return [
            Failure(
                "closed-form-vs-lp",
                _w(inst),
                f"closed form {res.closed_form_value} != LP optimum {res.lp_value}",
            )
        ]
    if 0 < inst.mu < 1 and not res.lp_cache_tight:
        return [Failure("closed-form-vs-lp", _w(inst), "LP optimum leaves cache unused")]
    return []


def check_placement_structure(inst: ProblemInstance, a: Optional[PlacementVector] = None) -> List[Failure]:
    """Feasibility, full cache use, two-adjacent support, equal partitioning at mu = l/K."""
    a = optimal_placement(inst) if a is None else a
    out = []
    report = check_feasible(inst, a)
    if not report:
        out.append(Failure("feasibility", _w(inst), "; ".join(report.violations)))
    mu, K = inst.mu, inst.K
    if 0 < mu < 1:
        if a.cache_usage() != mu:
            out.append(Failure("cache-tight", _w(inst), f"usage {a.cache_usage()} != mu {mu}"))
        support = a.support()
        if not support_is_adjacent_pair(support):
            out.append(Failure("support", _w(inst), f"support {support}"))
        muK = mu * K
        if muK.denominator == 1:
            l = int(muK)
            want = [Fraction(0)] * (K + 1)
            want[l] = Fraction(1, binom(K, l))
            if list(a) != want:
                out.append(Failure("equal-partition", _w(inst), f"got {a}, expected a_{l} = 1/{binom(K, l)}"))
    if mu == 0 and minimum_expected_rate(inst) != expected_distinct(inst.N, K):
        out.append(Failure("endpoint", _w(inst), "rate at M=0 is not E[distinct]"))
    if mu == 1 and minimum_expected_rate(inst) != 0:
        out.append(Failure("endpoint", _w(inst), "rate at M=N is not 0"))
    return out


def check_closed_form_rate(inst: ProblemInstance) -> List[Failure]:
    lhs = minimum_expected_rate(inst)
    rhs = expected_rate(inst, optimal_placement(inst))
    if lhs != rhs:
        return [Failure("closed-form-rate", _w(inst), f"{lhs} != {rhs}")]
    return []


def check_regimes(inst: ProblemInstance) -> List[Failure]:
    if not 0 < inst.mu < 1:
        return []
    a = optimal_placement(inst)
    out = []
    for n in range(1, min(inst.N, inst.K) + 1):
        value, label = case_rate_breakdown(inst, n)
        direct = per_demand_rate(inst, a, n)
        if value != direct:
            out.append(Failure("regimes", _w(inst) + f" n={n}", f"{label}: {value} != {direct}"))
    return out


def check_stirling_vs_enumeration(N: int, K: int, counts: Optional[Counter] = None) -> List[Failure]:
    counts = distinct_counts(N, K) if counts is None else counts
    total = N**K
    formula = distinct_distribution(N, K).probabilities
    empirical = {n: Fraction(c, total) for n, c in counts.items()}
    if empirical != formula:
        return [Failure("stirling-vs-enumeration", f"N={N} K={K}", f"{empirical} != {formula}")]
    return []


def check_enumerated_rate(inst: ProblemInstance, counts: Optional[Counter] = None) -> List[Failure]:
    a = optimal_placement(inst)
    counts = distinct_counts(inst.N, inst.K) if counts is None else counts
    enumerated = sum((c * per_demand_rate(inst, a, n) for n, c in counts.items()), Fraction(0)) / inst.N**inst.K
    formula = expected_rate(inst, a)
    if enumerated != formula:
        return [Failure("enumeration-vs-formula", _w(inst), f"{enumerated} != {formula}")]
    return []


def check_delivery(
    inst: ProblemInstance,
    seed: int = 0,
    demands: Optional[Iterable[Sequence[int]]] = None,
    fill: str = "random",
    multiplier: int = 1,
) -> List[Failure]:
    """Simulate every demand: load identity, bit-exact decoding, cache budget."""
    a = optimal_placement(inst)
    F = choose_file_size(a) * multiplier
    store, caches = partition_and_cache(inst, a, F, seed, fill)
    out = []
    for k, cache in caches.items():
        used = cache_occupancy(store, cache)
        limit = inst.M * F
        if used > limit or (0 < inst.mu < 1 and used != limit):
            out.append(Failure("cache-budget", _w(inst), f"user {k} stores {used} bits, budget {limit}"))
    if demands is None:
        demands = itertools.product(range(1, inst.N + 1), repeat=inst.K)
    rates = {n: per_demand_rate(inst, a, n) for n in range(1, min(inst.N, inst.K) + 1)}
    for d in demands:
        transcript = build_messages(inst, a, d, store, caches)
        load = delivered_load(transcript)
        if load != rates[len(set(d))]:
            out.append(Failure("delivered-load", _w(inst, d), f"{load} != {rates[len(set(d))]}"))
        for k in range(1, inst.K + 1):
            try:
                bits = decode_check(transcript, caches, k)
            except DecodingError as exc:
                out.append(Failure("decode", _w(inst, d), str(exc)))
                continue
            if bits != store.files[d[k - 1]]:
                out.append(Failure("decode", _w(inst, d), f"user {k} reconstructed wrong bits"))
    return out


def perturb(a: PlacementVector, amount: Fraction = Fraction(1, 1000)) -> PlacementVector:
    """Shift the first nonzero entry by ``amount`` (fault injection)."""
    values = list(a)
    l = a.support()[0]
    values[l] += amount
    return PlacementVector(values)


@dataclass
class SuiteConfig:
    Ks: Sequence[int]
    Ns: Sequence[int]
    grid: Callable[[int], Sequence[Fraction]] = cache_grid
    cap: int = 10**6
    sim_cap: int = 1024
    sim_max_K: int = 8
    seed: int = 0
    inject_fault: bool = False


@dataclass
class SuiteResult:
    tallies: Dict[str, CheckTally]

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tallies.values())

    @property
    def failures(self) -> List[Failure]:
        return [f for t in self.tallies.values() for f in t.failures]

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": t.name, "runs": t.runs, "failures": len(t.failures), "passed": t.passed}
                for t in self.tallies.values()
            ],
            "failures": [asdict(f) for f in self.failures],
        }


def run_suite(cfg: SuiteConfig) -> SuiteResult:
    names = [
        "closed-form-vs-lp",
        "placement-structure",
        "closed-form-rate",
        "regimes",
        "stirling-vs-enumeration",
        "enumeration-vs-formula",
        "delivery",
    ]
    tallies = {n: CheckTally(n) for n in names}

    def record(name: str, failures: List[Failure]) -> None:
        tallies[name].runs += 1
        tallies[name].failures.extend(failures)

    for K in cfg.Ks:
        for N in cfg.Ns:
            counts = None
            if N**K <= cfg.cap:
                counts = distinct_counts(N, K)
                record("stirling-vs-enumeration", check_stirling_vs_enumeration(N, K, counts))
            for M in cfg.grid(N):
                inst = ProblemInstance(N, K, M)
                a = optimal_placement(inst)
                if cfg.inject_fault:
                    a = perturb(a)
                record("placement-structure", check_placement_structure(inst, a))
                record("closed-form-vs-lp", check_closed_form_vs_lp(inst))
                record("closed-form-rate", check_closed_form_rate(inst))
                record("regimes", check_regimes(inst))
                if counts is not None:
                    record("enumeration-vs-formula", check_enumerated_rate(inst, counts))
                if N**K <= cfg.sim_cap and K <= cfg.sim_max_K:
                    record("delivery", check_delivery(inst, cfg.seed))
    return SuiteResult(tallies)
