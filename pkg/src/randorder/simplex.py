"""Dense primal simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The tableau is a list of Python lists so that the same code runs on
:class:`~fractions.Fraction` (exact) and ``float`` data. Pivoting follows
Bland's rule: the entering column is the smallest index with positive reduced
cost and ratio-test ties leave through the smallest basic index. With
``b >= 0`` the slack basis is feasible, so no phase one is needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

PIVOT_TOL = 1e-9
_SNAP = 1e-13


class NumericalFailure(RuntimeError):
    pass


class Unbounded(RuntimeError):
    pass


@dataclass
class TableauResult:
    x: list  # values of the structural variables
    duals: list  # one price per constraint row
    objective: object
    basis: tuple  # basic variable index per row
    pivots: int


def solve_tableau(c: Sequence, A: Sequence[Sequence], b: Sequence, exact: bool,
                  max_pivots: int | None = None) -> TableauResult:
    rows, ncols = len(A), len(c)
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    width = ncols + rows + 1  # structural | slack | rhs
    T = []
    for r in range(rows):
        row = list(A[r]) + [zero] * rows + [b[r]]
        row[ncols + r] = one
        T.append(row)
    # reduced costs c_j - z_j; last entry holds -objective
    z = list(c) + [zero] * rows + [zero]
    basis = [ncols + r for r in range(rows)]
    tol = 0 if exact else PIVOT_TOL
    limit = max_pivots if max_pivots is not None else 50 * (rows + width)

    pivots = 0
    while True:
        enter = next((k for k in range(width - 1) if z[k] > tol), None)
        if enter is None:
            break
        leave, best = None, None
        for r in range(rows):
            a = T[r][enter]
            if a > tol:
                ratio = T[r][-1] / a
                if best is None or ratio < best - (0 if exact else _SNAP * (1 + abs(best))):
                    leave, best = r, ratio
                elif (exact and ratio == best) or (not exact and abs(ratio - best) <= _SNAP * (1 + abs(best))):
                    if basis[r] < basis[leave]:
                        leave, best = r, min(ratio, best)
        if leave is None:
            raise Unbounded(f"column {enter} is unbounded")
        _pivot(T, z, leave, enter, exact)
        basis[leave] = enter
        pivots += 1
        if pivots > limit:
            raise NumericalFailure(f"simplex exceeded {limit} pivots")

    x = [zero] * ncols
    for r, k in enumerate(basis):
        if k < ncols:
            x[k] = T[r][-1]
    duals = [-z[ncols + r] for r in range(rows)]
    return TableauResult(x, duals, -z[-1], tuple(basis), pivots)


def _pivot(T, z, r, k, exact):
    prow = T[r]
    p = prow[k]
    if p != 1:
        prow = [e / p for e in prow]
        T[r] = prow
    nz = [q for q, e in enumerate(prow) if e]
    for row in T:
        if row is prow:
            continue
        f = row[k]
        if f:
            for q in nz:
                row[q] -= f * prow[q]
            if not exact:
                for q in nz:
                    if -_SNAP < row[q] < _SNAP:
                        row[q] = 0.0
            row[k] = 0 * f
    f = z[k]
    if f:
        for q in nz:
            z[q] -= f * prow[q]
        z[k] = 0 * f
