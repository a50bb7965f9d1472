"""Exact linear programming over rationals.

Programs are maximization problems in the inequality form

    max  c . x    subject to    A x <= b,  x >= 0.

The solver is a two-phase dense tableau simplex using Bland's smallest-index
pivot rule, so it cannot cycle and every run is deterministic. All pivots
are carried out in fractions.Fraction, which makes optima exact; ties in
the ratio test break toward the lowest basic variable index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from ..errors import StructuralError
from ..rationals import F0, F1, frac

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """max objective . x  s.t.  rows[i] . x <= rhs[i],  x >= 0."""

    objective: tuple
    rows: tuple
    rhs: tuple

    def __init__(self, objective: Sequence, rows: Sequence[Sequence], rhs: Sequence):
        objective = tuple(frac(v) for v in objective)
        rows = tuple(tuple(frac(v) for v in row) for row in rows)
        rhs = tuple(frac(v) for v in rhs)
        if len(rows) != len(rhs):
            raise StructuralError(
                f"matrix has {len(rows)} rows but rhs has {len(rhs)} entries"
            )
        for row in rows:
            if len(row) != len(objective):
                raise StructuralError(
                    f"row of width {len(row)} does not match objective width {len(objective)}"
                )
        object.__setattr__(self, "objective", objective)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "rhs", rhs)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_rows(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class LPSolution:
    status: str
    x: Optional[tuple]
    value: Optional[Fraction]

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _pivot(tableau, obj, basis, prow_idx, pcol):
    prow = tableau[prow_idx]
    piv = prow[pcol]
    if piv != F1:
        inv = F1 / piv
        prow = [a * inv for a in prow]
        tableau[prow_idx] = prow
    for r in range(len(tableau)):
        if r == prow_idx:
            continue
        row = tableau[r]
        f = row[pcol]
        if f:
            tableau[r] = [a - f * b for a, b in zip(row, prow)]
    f = obj[pcol]
    if f:
        obj[:] = [a - f * b for a, b in zip(obj, prow)]
    basis[prow_idx] = pcol


def _run_simplex(tableau, obj, basis, ncols):
    """Bland's rule loop. Returns None on optimality, or the unbounded column."""
    while True:
        pcol = -1
        for j in range(ncols):
            if obj[j] > 0:
                pcol = j
                break
        if pcol < 0:
            return None
        prow_idx = -1
        best_ratio = None
        for r, row in enumerate(tableau):
            a = row[pcol]
            if a > 0:
                ratio = row[-1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[r] < basis[prow_idx])
                ):
                    best_ratio = ratio
                    prow_idx = r
        if prow_idx < 0:
            return pcol
        _pivot(tableau, obj, basis, prow_idx, pcol)


def solve_lp(lp: LinearProgram) -> LPSolution:
    n = lp.num_vars
    m = lp.num_rows

    # Constraint rows with slacks appended: A x + s = b.
    tableau = []
    rhs = list(lp.rhs)
    negate = [b < 0 for b in rhs]
    for i, row in enumerate(lp.rows):
        full = list(row) + [F0] * m + [rhs[i]]
        full[n + i] = F1
        if negate[i]:
            full = [-a for a in full]
        tableau.append(full)

    art_rows = [i for i in range(m) if negate[i]]
    ncols = n + m + len(art_rows)
    basis = []
    for i in range(m):
        if negate[i]:
            col = n + m + art_rows.index(i)
        else:
            col = n + i
        basis.append(col)
    # widen rows with artificial columns
    for i in range(m):
        extra = [F0] * len(art_rows)
        if negate[i]:
            extra[art_rows.index(i)] = F1
        row = tableau[i]
        tableau[i] = row[:-1] + extra + [row[-1]]

    if art_rows:
        # Phase 1: maximize -(sum of artificials); feasible iff optimum is 0.
        obj = [F0] * ncols + [F0]
        for i in art_rows:
            row = tableau[i]
            for j in range(ncols + 1):
                if row[j]:
                    obj[j] += row[j]
        for j in range(n + m, ncols):
            obj[j] = F0
        unbounded_col = _run_simplex(tableau, obj, basis, ncols)
        assert unbounded_col is None  # phase 1 objective is bounded above by 0
        if obj[-1] != 0:
            # obj[-1] holds -(phase 1 value), i.e. the artificial mass left over.
            return LPSolution(INFEASIBLE, None, None)
        # Drive any artificial still in the basis out of it (degenerate rows).
        drop = []
        for r in range(m):
            if basis[r] >= n + m:
                row = tableau[r]
                pcol = -1
                for j in range(n + m):
                    if row[j]:
                        pcol = j
                        break
                if pcol < 0:
                    drop.append(r)
                else:
                    _pivot(tableau, obj, basis, r, pcol)
        for r in reversed(drop):
            del tableau[r]
            del basis[r]
        # Strip artificial columns (they sit at the end, so indices are stable).
        for r in range(len(tableau)):
            row = tableau[r]
            tableau[r] = row[: n + m] + [row[-1]]
        ncols = n + m

    # Phase 2 objective row, priced out against the current basis.
    obj = [frac(c) for c in lp.objective] + [F0] * (ncols - n) + [F0]
    for r, row in enumerate(tableau):
        cb = obj[basis[r]] if basis[r] < ncols else F0
        if cb:
            obj[:] = [a - cb * b for a, b in zip(obj, row)]
    unbounded_col = _run_simplex(tableau, obj, basis, ncols)
    if unbounded_col is not None:
        return LPSolution(UNBOUNDED, None, None)

    x = [F0] * n
    for r, col in enumerate(basis):
        if col < n:
            x[col] = tableau[r][-1]
    value = sum((c * v for c, v in zip(lp.objective, x)), F0)
    return LPSolution(OPTIMAL, tuple(x), value)
