"""Acceptance suite: each test is tagged with the criterion it decides.

The conftest hook prints a PASS/FAIL line per criterion after the run.
"""

import contextlib
import csv
import io
import time
from decimal import Decimal
from fractions import Fraction

import pytest

from mccs.cli import main
from mccs.combinatorics import binom, expected_distinct, prob_distinct
from mccs.delivery import DecodingError, build_messages, choose_file_size, decode_check, partition_and_cache
from mccs.demand_oracle import enumerate_distinct_distribution, enumerate_expected_rate
from mccs.lp import OPTIMAL, build_p2, simplex_solve
from mccs.placement import (
    BOTH_LEVELS_REDUNDANT,
    LOWER_LEVEL_REDUNDANT,
    NO_REDUNDANCY,
    ProblemInstance,
    case_rate_breakdown,
    check_feasible,
    expected_rate,
    minimum_expected_rate,
    optimal_placement,
    peak_rate_ccs,
    per_demand_rate,
    round_half_up,
)
from mccs.verification import cache_grid, check_delivery

F = Fraction


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def full_grid():
    for K in range(1, 11):
        for N in range(1, 11):
            for M in cache_grid(N):
                yield ProblemInstance(N, K, M)


# ---------------------------------------------------------------- 1


# Reference placement table for K=7, N=10, as printed (3 decimals, M = 0..10).
REFERENCE_TABLE = {
    0: ["1.0", "0", "0", "0", "0", "0", "0", "0"],
    1: ["0.3", "0.1", "0", "0", "0", "0", "0", "0"],
    2: ["0", "0.086", "0.019", "0", "0", "0", "0", "0"],
    3: ["0", "0", "0.043", "0.003", "0", "0", "0", "0"],
    4: ["0", "0", "0.01", "0.023", "0", "0", "0", "0"],
    5: ["0", "0", "0", "0.014", "0.014", "0", "0", "0"],
    6: ["0", "0", "0", "0", "0.01", "0.023", "0", "0"],
    7: ["0", "0", "0", "0", "0.003", "0.043", "0", "0"],
    8: ["0", "0", "0", "0", "0", "0.019", "0.086", "0"],
    9: ["0", "0", "0", "0", "0", "0", "0.1", "0.3"],
    10: ["0", "0", "0", "0", "0", "0", "0", "1.0"],
}
THREE_PLACES = Decimal("0.001")


@pytest.fixture(scope="module")
def table_output():
    buf = io.StringIO()
    start = time.perf_counter()
    with contextlib.redirect_stdout(buf):
        code = main(["table", "--K", "7", "--N", "10"])
    elapsed = time.perf_counter() - start
    rows = {int(r["M"]): r for r in csv.DictReader(io.StringIO(buf.getvalue()))}
    return code, elapsed, rows


@criterion(1, "table --K 7 --N 10 reproduces the reference placement table at 3 decimals, < 1 s")
@pytest.mark.parametrize("M", sorted(REFERENCE_TABLE))
def test_c1_table_row(table_output, M):
    code, elapsed, rows = table_output
    assert code == 0 and elapsed < 1.0
    got = [Decimal(rows[M][f"a_{l}"]).quantize(THREE_PLACES) for l in range(8)]
    want = [Decimal(v).quantize(THREE_PLACES) for v in REFERENCE_TABLE[M]]
    assert got == want, f"M={M}: computed {got}, reference {want}"


# ---------------------------------------------------------------- 2


@criterion(2, "closed-form rate equals exact simplex optimum on K,N <= 10, quarter M grid, < 2 min")
def test_c2_closed_form_matches_lp():
    start = time.perf_counter()
    mismatches = []
    count = 0
    for inst in full_grid():
        sol = simplex_solve(build_p2(inst))
        count += 1
        if sol.status != OPTIMAL or sol.optimal_value != minimum_expected_rate(inst):
            mismatches.append((inst, sol.status, sol.optimal_value))
        if expected_rate(inst, optimal_placement(inst)) != minimum_expected_rate(inst):
            mismatches.append((inst, "closed-form", None))
    elapsed = time.perf_counter() - start
    assert count == sum(10 * (4 * N + 1) for N in range(1, 11))
    assert not mismatches, mismatches[:5]
    assert elapsed < 120, elapsed


# ---------------------------------------------------------------- 3


@criterion(3, "distinct-request law equals exhaustive enumeration for N,K <= 5, < 10 s")
def test_c3_stirling_vs_enumeration():
    start = time.perf_counter()
    for N in range(1, 6):
        for K in range(1, 6):
            law = enumerate_distinct_distribution(N, K).probabilities
            assert set(law) == set(range(1, min(N, K) + 1))
            for n in range(1, min(N, K) + 1):
                assert prob_distinct(N, K, n) == law[n], (N, K, n)
    assert time.perf_counter() - start < 10


# ---------------------------------------------------------------- 4


@criterion(4, "expected_rate equals enumeration over all demands for N,K <= 5, quarter M grid, < 1 min")
def test_c4_expected_rate_vs_enumeration():
    start = time.perf_counter()
    for K in range(1, 6):
        for N in range(1, 6):
            for M in cache_grid(N):
                inst = ProblemInstance(N, K, M)
                a = optimal_placement(inst)
                assert expected_rate(inst, a) == enumerate_expected_rate(inst, a), inst
    assert time.perf_counter() - start < 60


# ---------------------------------------------------------------- 5


@criterion(5, "bit-exact delivery: load, decoding and cache budget for K <= 6, N <= 4, half M grid, < 5 min")
def test_c5_delivery_correctness():
    start = time.perf_counter()
    failures = []
    demands = 0
    for K in range(1, 7):
        for N in range(1, 5):
            for M in cache_grid(N, F(1, 2)):
                inst = ProblemInstance(N, K, M)
                failures.extend(check_delivery(inst, seed=K * 100 + N))
                demands += N**K
    elapsed = time.perf_counter() - start
    assert demands == sum((2 * N + 1) * N**K for K in range(1, 7) for N in range(1, 5))
    assert not failures, [str(f) for f in failures[:5]]
    assert elapsed < 300, elapsed


# ---------------------------------------------------------------- 6


@criterion(6, "cache tight, support of at most two adjacent levels, equal partition at mu = l/K")
def test_c6_placement_structure():
    failures = []
    for inst in full_grid():
        if not 0 < inst.mu < 1:
            continue
        a = optimal_placement(inst)
        if not check_feasible(inst, a):
            failures.append((inst, "feasible"))
        if a.cache_usage() != inst.mu:
            failures.append((inst, "cache"))
        s = a.support()
        if not (len(s) == 1 or (len(s) == 2 and s[1] == s[0] + 1)):
            failures.append((inst, "support"))
        muK = inst.mu * inst.K
        if muK.denominator == 1:
            l = int(muK)
            if s != [l] or a[l] != F(1, binom(inst.K, l)):
                failures.append((inst, "equal-partition"))
    assert not failures, failures[:5]


# ---------------------------------------------------------------- 7


@criterion(7, "per-regime rate formulas agree with the per-demand rate for K=7, N=10, M=2")
def test_c7_regimes():
    inst = ProblemInstance(10, 7, 2)
    a = optimal_placement(inst)
    labels = set()
    for n in range(1, 8):
        value, label = case_rate_breakdown(inst, n)
        assert value == per_demand_rate(inst, a, n), n
        labels.add(label)
    assert labels == {BOTH_LEVELS_REDUNDANT, LOWER_LEVEL_REDUNDANT, NO_REDUNDANCY}


# ---------------------------------------------------------------- 8


@criterion(8, "rate-vs-K sweep for M=2, N=10, K=1..40: dominance, support shape, monotone, < 10 s")
def test_c8_sweep_properties():
    start = time.perf_counter()
    rates = []
    for K in range(1, 41):
        inst = ProblemInstance(10, K, 2)
        a = optimal_placement(inst)
        rate = expected_rate(inst, a)
        assert rate <= peak_rate_ccs(K, a), K
        expected_nonzeros = 1 if K % 5 == 0 else 2
        assert len(a.support()) == expected_nonzeros, (K, a.support())
        rates.append(rate)
    assert all(x <= y for x, y in zip(rates, rates[1:]))
    assert time.perf_counter() - start < 10


# ---------------------------------------------------------------- 9


@criterion(9, "minimum rate nonincreasing in M with exact endpoints E[distinct] and 0")
def test_c9_monotone_in_cache():
    for K in range(1, 11):
        for N in range(1, 11):
            rates = [minimum_expected_rate(ProblemInstance(N, K, M)) for M in cache_grid(N)]
            assert all(x >= y for x, y in zip(rates, rates[1:])), (N, K)
            assert rates[0] == expected_distinct(N, K)
            assert rates[-1] == 0


# ---------------------------------------------------------------- 10


MUTATION_INSTANCES = [
    (2, 2, 1), (3, 3, 1), (3, 3, 2), (4, 3, F(3, 2)), (4, 4, 1), (4, 4, F(5, 2)),
    (5, 4, 2), (5, 5, F(7, 4)), (6, 5, 3), (3, 5, F(6, 5)), (2, 4, F(1, 2)), (6, 6, F(9, 4)),
]


@criterion(10, "dropping any single coded message from a worst-case transcript breaks decoding, >= 10 instances")
@pytest.mark.parametrize("N, K, M", MUTATION_INSTANCES, ids=lambda v: str(v))
def test_c10_mutation_sensitivity(N, K, M):
    inst = ProblemInstance(N, K, M)
    a = optimal_placement(inst)
    store, caches = partition_and_cache(inst, a, choose_file_size(a), seed=N * K)
    # Worst case: as many distinct files as possible.
    demand = tuple((k % N) + 1 for k in range(K))
    transcript = build_messages(inst, a, demand, store, caches)
    assert transcript.messages
    for k in range(1, K + 1):
        assert decode_check(transcript, caches, k) == store.files[demand[k - 1]]
    for i, msg in enumerate(transcript.messages):
        assert msg.length > 0
        broken = transcript.without(i)
        failed = []
        for k in range(1, K + 1):
            try:
                ok = decode_check(broken, caches, k) == store.files[demand[k - 1]]
            except DecodingError:
                ok = False
            if not ok:
                failed.append(k)
        assert failed, f"dropping message {i} went unnoticed"


def test_mutation_sample_size():
    assert len(MUTATION_INSTANCES) >= 10
    assert all(0 < F(M) / N < 1 for N, _, M in MUTATION_INSTANCES)


def test_reference_row_six_cannot_be_feasible():
    # Any placement rounded to 3 decimals keeps sum C(K,l) a_l within
    # sum C(K,l) * 0.0005 of 1. The reference row at M=6 misses by far more,
    # while its mirror image (the computed row) is consistent and matches M=4 reversed.
    row = [Decimal(v) for v in REFERENCE_TABLE[6]]
    slack = sum(binom(7, l) for l in range(8) if row[l] != 0) * Decimal("0.0005")
    printed_total = sum(binom(7, l) * row[l] for l in range(8))
    assert abs(printed_total - 1) > slack
    swapped = row[:4] + [row[5], row[4]] + row[6:]
    assert abs(sum(binom(7, l) * swapped[l] for l in range(8)) - 1) <= slack
    assert [Decimal(v) for v in REFERENCE_TABLE[4]] == list(reversed(swapped))
    exact = optimal_placement(ProblemInstance(10, 7, 6))
    assert [round_half_up(x, 3) for x in exact] == swapped
