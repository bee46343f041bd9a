"""Dense two-phase simplex over exact rationals.

Small problems only (per-node systems, a few hundred cells).  Bland's rule
guarantees termination on degenerate problems.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .numeric import to_fraction

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: tuple[Fraction, ...] | None = None
    fun: Fraction | None = None


def _pivot(tab: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = tab[row][col]
    if piv != 1:
        inv = 1 / piv
        tab[row] = [v * inv if v else v for v in tab[row]]
    prow = tab[row]
    nz = [j for j, v in enumerate(prow) if v]
    for i, r in enumerate(tab):
        if i != row:
            f = r[col]
            if f:
                for j in nz:
                    r[j] -= f * prow[j]
    basis[row] = col


def _run(tab: list[list[Fraction]], basis: list[int], allowed: int) -> str:
    """Minimize the objective stored in the last row; columns >= allowed never enter."""
    m = len(tab) - 1
    obj = tab[m]
    while True:
        col = next((j for j in range(allowed) if obj[j] < 0), None)
        if col is None:
            return OPTIMAL
        best = None
        for i in range(m):
            a = tab[i][col]
            if a > 0:
                ratio = tab[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return UNBOUNDED
        _pivot(tab, basis, best[1], col)


def linprog(
    c: Sequence,
    A_ub: Sequence[Sequence] = (),
    b_ub: Sequence = (),
    A_eq: Sequence[Sequence] = (),
    b_eq: Sequence = (),
    free: Sequence[bool] | None = None,
    maximize: bool = False,
) -> LPResult:
    """Solve ``min c.x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``.

    Variables flagged in ``free`` are unrestricted in sign.  With
    ``maximize=True`` the objective is maximized and ``fun`` is the maximum.
    """
    n = len(c)
    free = list(free) if free is not None else [False] * n
    # split free variables into positive and negative parts
    cols: list[tuple[int, int]] = []
    for j in range(n):
        cols.append((j, 1))
        if free[j]:
            cols.append((j, -1))
    nv = len(cols)
    sign = -1 if maximize else 1

    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    kinds: list[str] = []
    for a, b in zip(A_ub, b_ub):
        rows.append([to_fraction(a[j]) * s for j, s in cols])
        rhs.append(to_fraction(b))
        kinds.append("ub")
    for a, b in zip(A_eq, b_eq):
        rows.append([to_fraction(a[j]) * s for j, s in cols])
        rhs.append(to_fraction(b))
        kinds.append("eq")
    m = len(rows)
    n_slack = kinds.count("ub")
    # columns: structural | slacks | artificials | rhs
    width = nv + n_slack + m
    tab: list[list[Fraction]] = []
    basis: list[int] = []
    slack_j = nv
    for i in range(m):
        row = rows[i] + [Fraction(0)] * (n_slack + m) + [rhs[i]]
        if kinds[i] == "ub":
            row[slack_j] = Fraction(1)
            slack_col = slack_j
            slack_j += 1
        else:
            slack_col = None
        if row[-1] < 0:
            row = [-v for v in row]
        if slack_col is not None and row[slack_col] == 1:
            basis.append(slack_col)
        else:
            row[nv + n_slack + i] = Fraction(1)
            basis.append(nv + n_slack + i)
        tab.append(row)

    art_start = nv + n_slack
    # phase 1: minimize the sum of artificials
    obj = [Fraction(0)] * (width + 1)
    for i, bcol in enumerate(basis):
        if bcol >= art_start:
            obj = [o - v for o, v in zip(obj, tab[i])]
            obj[bcol] = Fraction(0)
    tab.append(obj)
    _run(tab, basis, art_start)
    if tab[-1][-1] != 0:
        return LPResult(INFEASIBLE)
    # drive remaining (zero-valued) artificials out of the basis
    for i in range(m):
        if basis[i] >= art_start:
            col = next((j for j in range(art_start) if tab[i][j] != 0), None)
            if col is not None:
                _pivot(tab, basis, i, col)
    keep = [i for i in range(m) if basis[i] < art_start]
    tab = [tab[i][:art_start] + [tab[i][-1]] for i in keep]
    basis = [basis[i] for i in keep]

    # phase 2
    cost = [Fraction(0)] * (art_start + 1)
    for k, (j, s) in enumerate(cols):
        cost[k] = sign * s * to_fraction(c[j])
    for i, bcol in enumerate(basis):
        f = cost[bcol]
        if f:
            cost = [a - f * b for a, b in zip(cost, tab[i])]
    tab.append(cost)
    status = _run(tab, basis, art_start)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED)
    values = [Fraction(0)] * art_start
    for i, bcol in enumerate(basis):
        values[bcol] = tab[i][-1]
    x = [Fraction(0)] * n
    for k, (j, s) in enumerate(cols):
        x[j] += s * values[k]
    fun = sum((to_fraction(c[j]) * x[j] for j in range(n)), Fraction(0))
    return LPResult(OPTIMAL, tuple(x), fun)
