"""Exact-arithmetic linear-programming oracle for the placement problem.

The placement problem is rebuilt as an explicit LP

    minimise    g . a
    subject to  b . a  = 1          (every bit of a file lands in exactly one subfile)
                c . a <= mu         (per-user cache budget)
                0 <= a_l <= 1

and solved by a two-phase tableau simplex over :class:`fractions.Fraction`
with Bland's rule. Nothing from the closed form is used, so agreement of
the two is a genuine cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .combinatorics import binom, distinct_distribution
from .placement import PlacementVector, ProblemInstance, expected_rate, optimal_placement

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    objective: Tuple[Fraction, ...]
    equality_row: Tuple[Fraction, ...]
    inequality_row: Tuple[Fraction, ...]
    inequality_rhs: Fraction
    equality_rhs: Fraction = Fraction(1)
    upper_bound: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        n = len(self.objective)
        if len(self.equality_row) != n or len(self.inequality_row) != n:
            raise ValueError("objective and constraint rows must have the same length")

    @property
    def size(self) -> int:
        return len(self.objective)


@dataclass
class LpSolution:
    status: str
    optimal_point: Optional[Tuple[Fraction, ...]] = None
    optimal_value: Optional[Fraction] = None
    pivots: int = 0


def build_p2(inst: ProblemInstance) -> LinearProgram:
    """Objective and constraint data of the placement LP for ``inst``."""
    K = inst.K
    dist = distinct_distribution(inst.N, K).probabilities
    g = []
    for l in range(K + 1):
        redundant = sum((p * binom(K - n, l + 1) for n, p in dist.items()), Fraction(0))
        g.append(binom(K, l + 1) - redundant)
    b = [Fraction(binom(K, l)) for l in range(K + 1)]
    c = [Fraction(binom(K - 1, l - 1)) if l >= 1 else Fraction(0) for l in range(K + 1)]
    return LinearProgram(tuple(g), tuple(b), tuple(c), inst.mu)


class _Tableau:
    """Dense simplex tableau; row i is ``A_i x = rhs_i`` with ``basis[i]`` basic."""

    def __init__(self, rows: List[List[Fraction]], rhs: List[Fraction], basis: List[int]):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.pivots = 0

    def pivot(self, r: int, col: int) -> None:
        row = self.rows[r]
        p = row[col]
        if p != 1:
            self.rows[r] = row = [v / p for v in row]
            self.rhs[r] /= p
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other[col]
            if f:
                self.rows[i] = [v - f * w for v, w in zip(other, row)]
                self.rhs[i] -= f * self.rhs[r]
        self.basis[r] = col
        self.pivots += 1

    def reduced_costs(self, cost: Sequence[Fraction]) -> List[Fraction]:
        n = len(cost)
        red = list(cost)
        for i, j in enumerate(self.basis):
            cb = cost[j]
            if cb:
                row = self.rows[i]
                for k in range(n):
                    if row[k]:
                        red[k] -= cb * row[k]
        return red

    def run(self, cost: Sequence[Fraction], allowed: int) -> str:
        """Minimise ``cost . x`` with Bland's rule over columns ``< allowed``."""
        while True:
            red = self.reduced_costs(cost)
            entering = next((j for j in range(allowed) if red[j] < 0), None)
            if entering is None:
                return OPTIMAL
            leave = None
            best: Optional[Fraction] = None
            for i, row in enumerate(self.rows):
                if row[entering] > 0:
                    ratio = self.rhs[i] / row[entering]
                    if (
                        best is None
                        or ratio < best
                        or (ratio == best and self.basis[i] < self.basis[leave])
                    ):
                        best, leave = ratio, i
            if leave is None:
                return UNBOUNDED
            self.pivot(leave, entering)

    def value(self, cost: Sequence[Fraction]) -> Fraction:
        return sum((cost[j] * self.rhs[i] for i, j in enumerate(self.basis)), Fraction(0))


def simplex_solve(lp: LinearProgram) -> LpSolution:
    """Exact optimum of an LP shaped like :func:`build_p2`'s output.

    Columns are the n decision variables, one slack for the budget row, n
    slacks for the upper bounds, and one artificial for the equality row.
    Phase one drives the artificial to zero; phase two optimises ``g``.
    """
    n = lp.size
    n_cols = 2 * n + 2
    slack_budget, artificial = n, 2 * n + 1

    def blank() -> List[Fraction]:
        return [Fraction(0)] * n_cols

    rows: List[List[Fraction]] = []
    rhs: List[Fraction] = []
    basis: List[int] = []

    eq_rhs = Fraction(lp.equality_rhs)
    eq_sign = -1 if eq_rhs < 0 else 1
    row = blank()
    for j, v in enumerate(lp.equality_row):
        row[j] = eq_sign * Fraction(v)
    row[artificial] = Fraction(1)
    rows.append(row)
    rhs.append(eq_sign * eq_rhs)
    basis.append(artificial)

    budget = Fraction(lp.inequality_rhs)
    if budget < 0 or lp.upper_bound < 0:
        # The slack basis below needs non-negative right-hand sides.
        raise ValueError("budget and upper bound must be non-negative")
    row = blank()
    for j, v in enumerate(lp.inequality_row):
        row[j] = Fraction(v)
    row[slack_budget] = Fraction(1)
    rows.append(row)
    rhs.append(budget)
    basis.append(slack_budget)

    for j in range(n):
        row = blank()
        row[j] = Fraction(1)
        row[n + 1 + j] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(lp.upper_bound))
        basis.append(n + 1 + j)

    tab = _Tableau(rows, rhs, basis)

    phase_one = blank()
    phase_one[artificial] = Fraction(1)
    tab.run(phase_one, allowed=n_cols)
    if tab.value(phase_one) != 0:
        return LpSolution(INFEASIBLE, pivots=tab.pivots)

    if artificial in tab.basis:
        # Degenerate: artificial is basic at level zero. Swap in any real column.
        r = tab.basis.index(artificial)
        col = next((j for j in range(artificial) if tab.rows[r][j] != 0), None)
        if col is None:
            del tab.rows[r], tab.rhs[r], tab.basis[r]
        else:
            tab.pivot(r, col)

    cost = blank()
    for j, v in enumerate(lp.objective):
        cost[j] = Fraction(v)
    status = tab.run(cost, allowed=artificial)
    if status != OPTIMAL:
        return LpSolution(status, pivots=tab.pivots)

    x = [Fraction(0)] * n_cols
    for i, j in enumerate(tab.basis):
        x[j] = tab.rhs[i]
    point = tuple(x[:n])
    value = sum((Fraction(g) * v for g, v in zip(lp.objective, point)), Fraction(0))
    return LpSolution(OPTIMAL, point, value, tab.pivots)


def satisfies_constraints(lp: LinearProgram, point: Sequence[Fraction]) -> bool:
    eq = sum((Fraction(b) * v for b, v in zip(lp.equality_row, point)), Fraction(0))
    ub = sum((Fraction(c) * v for c, v in zip(lp.inequality_row, point)), Fraction(0))
    return (
        eq == lp.equality_rhs
        and ub <= lp.inequality_rhs
        and all(0 <= v <= lp.upper_bound for v in point)
    )


def support_is_adjacent_pair(support: Sequence[int]) -> bool:
    """At most two nonzeros, and if two, at neighbouring indices."""
    if len(support) > 2:
        return False
    return len(support) < 2 or support[1] - support[0] == 1


@dataclass
class ClosedFormCheck:
    instance: ProblemInstance
    closed_form_point: PlacementVector
    closed_form_value: Fraction
    lp_status: str
    lp_point: Optional[Tuple[Fraction, ...]]
    lp_value: Optional[Fraction]
    pivots: int
    equal: bool
    lp_support: List[int] = field(default_factory=list)
    lp_support_ok: bool = False
    lp_cache_tight: bool = False


def verify_closed_form(inst: ProblemInstance) -> ClosedFormCheck:
    """Compare the closed-form optimum against the simplex optimum, exactly."""
    a = optimal_placement(inst)
    closed = expected_rate(inst, a)
    lp = build_p2(inst)
    sol = simplex_solve(lp)
    support: List[int] = []
    support_ok = tight = False
    if sol.status == OPTIMAL:
        point = PlacementVector(sol.optimal_point)
        support = point.support()
        support_ok = support_is_adjacent_pair(support)
        tight = point.cache_usage() == inst.mu
    return ClosedFormCheck(
        instance=inst,
        closed_form_point=a,
        closed_form_value=closed,
        lp_status=sol.status,
        lp_point=sol.optimal_point,
        lp_value=sol.optimal_value,
        pivots=sol.pivots,
        equal=sol.status == OPTIMAL and sol.optimal_value == closed,
        lp_support=support,
        lp_support_ok=support_ok,
        lp_cache_tight=tight,
    )
