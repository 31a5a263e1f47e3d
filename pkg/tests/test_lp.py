import itertools
from fractions import Fraction

import pytest

from mccs.lp import (
    INFEASIBLE,
    OPTIMAL,
    LinearProgram,
    build_p2,
    satisfies_constraints,
    simplex_solve,
    verify_closed_form,
)
from mccs.placement import ProblemInstance, minimum_expected_rate

F = Fraction


def solve_square(A, b):
    """Exact Gauss-Jordan; returns None when singular."""
    n = len(A)
    M = [list(map(F, row)) + [F(rhs)] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def vertex_oracle(lp):
    """Minimum over all basic feasible points: pick n tight constraints, solve, filter."""
    n = lp.size
    rows = [(list(lp.inequality_row), lp.inequality_rhs)]
    for j in range(n):
        unit = [0] * n
        unit[j] = 1
        rows.append((unit, 0))
        rows.append((unit, lp.upper_bound))
    best = None
    for chosen in itertools.combinations(rows, n - 1):
        A = [list(lp.equality_row)] + [r for r, _ in chosen]
        b = [lp.equality_rhs] + [v for _, v in chosen]
        x = solve_square(A, b)
        if x is None or not satisfies_constraints(lp, x):
            continue
        value = sum(F(g) * v for g, v in zip(lp.objective, x))
        best = value if best is None else min(best, value)
    return best


def test_build_p2_rows():
    lp = build_p2(ProblemInstance(2, 2, 1))
    assert list(lp.equality_row) == [1, 2, 1]
    assert list(lp.inequality_row) == [0, 1, 1]
    assert lp.inequality_rhs == F(1, 2)


def test_build_p2_last_objective_entry_zero():
    assert build_p2(ProblemInstance(10, 7, 2)).objective[7] == 0


def test_build_p2_objective_small():
    # P(1) = 1/4, P(2) = 3/4 for N=2, K=3.
    g = build_p2(ProblemInstance(2, 3, 1)).objective
    expected = [
        3 - (F(1, 4) * 2 + F(3, 4) * 1),  # C(3,1) - E[C(3-n,1)]
        3 - (F(1, 4) * 1 + 0),  # C(3,2) - E[C(3-n,2)]
        1,
        0,
    ]
    assert list(g) == expected


def test_simplex_matches_closed_form_m2():
    inst = ProblemInstance(10, 7, 2)
    sol = simplex_solve(build_p2(inst))
    assert sol.status == OPTIMAL
    assert sol.optimal_value == minimum_expected_rate(inst)


def test_simplex_full_cache():
    sol = simplex_solve(build_p2(ProblemInstance(2, 2, 2)))
    assert sol.optimal_point == (0, 0, 1)
    assert sol.optimal_value == 0


def test_simplex_zero_objective():
    lp = LinearProgram((F(0),) * 3, (F(1), F(2), F(1)), (F(0), F(1), F(1)), F(1, 2))
    sol = simplex_solve(lp)
    assert sol.status == OPTIMAL and sol.optimal_value == 0
    assert satisfies_constraints(lp, sol.optimal_point)


def test_simplex_reports_infeasible():
    # b . a = 1 needs a_1 + a_2 >= 1/2 but the budget only allows 1/4 on them.
    lp = LinearProgram((F(1),) * 3, (F(0), F(2), F(2)), (F(0), F(1), F(1)), F(1, 4))
    assert simplex_solve(lp).status == INFEASIBLE


def test_simplex_against_vertex_oracle():
    for K in range(1, 5):
        for N in range(1, 5):
            for q in range(4 * N + 1):
                inst = ProblemInstance(N, K, F(q, 4))
                lp = build_p2(inst)
                sol = simplex_solve(lp)
                assert sol.status == OPTIMAL
                assert satisfies_constraints(lp, sol.optimal_point)
                assert sol.optimal_value == vertex_oracle(lp), inst


def test_simplex_deterministic():
    lp = build_p2(ProblemInstance(7, 9, F(13, 4)))
    first, second = simplex_solve(lp), simplex_solve(lp)
    assert first.optimal_point == second.optimal_point
    assert first.pivots == second.pivots


def test_pivot_ceiling_and_tightness():
    for K in range(1, 11):
        for N in range(1, 11):
            for q in range(4 * N + 1):
                inst = ProblemInstance(N, K, F(q, 4))
                res = verify_closed_form(inst)
                assert res.equal, inst
                assert res.pivots <= 10 * (K + 4), (inst, res.pivots)
                if 0 < inst.mu < 1:
                    assert res.lp_cache_tight, inst


@pytest.mark.parametrize(
    "inst",
    [ProblemInstance(10, 7, M) for M in range(11)]
    + [ProblemInstance(3, 5, F(3, 2)), ProblemInstance(1, 1, F(1, 2))],
    ids=str,
)
def test_verify_closed_form_examples(inst):
    res = verify_closed_form(inst)
    assert res.equal
    assert res.closed_form_value == res.lp_value


def test_verify_closed_form_half_user():
    res = verify_closed_form(ProblemInstance(1, 1, F(1, 2)))
    assert list(res.closed_form_point) == [F(1, 2), F(1, 2)]
    assert res.lp_point == (F(1, 2), F(1, 2))


def test_lp_support_with_unique_optimum():
    # With N >= 2 the LP vertex has the two-adjacent shape too.
    for K in range(2, 8):
        for N in range(2, 6):
            for q in range(1, 4 * N):
                res = verify_closed_form(ProblemInstance(N, K, F(q, 4)))
                assert res.lp_support_ok


def test_single_file_optimum_is_not_unique():
    # N = 1: every request is the same file, so any cache-tight placement is optimal.
    res = verify_closed_form(ProblemInstance(1, 3, F(1, 2)))
    assert res.equal and res.lp_cache_tight
    assert res.closed_form_value == F(1, 2)
