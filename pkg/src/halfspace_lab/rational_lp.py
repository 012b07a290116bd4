"""Exact feasibility of ``A v <= -1`` over the rationals.

One phase-I simplex on the Farkas system ``A^T y = 0, sum(y) = 1, y >= 0``
decides both sides: an optimum of 0 yields the infeasibility multipliers
``y``; a positive optimum yields, through the final simplex multipliers, a
point ``v`` with ``A v <= -1``. Bland's rule keeps it finite. All arithmetic is
in :class:`fractions.Fraction`.

Large systems are solved by constraint generation: the simplex runs on a
working subset of rows, and rows the current point violates are added until
none remain. A certificate for a subset is a certificate for the whole system
(multipliers of the unused rows are zero), so the answer stays exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass
class FarkasResult:
    feasible: bool
    point: list[Fraction] | None = None
    multipliers: list[Fraction] | None = None
    pivots: int = 0


def _pivot(T, obj, row, col):
    prow = T[row]
    p = prow[col]
    if p != 1:
        inv = 1 / p
        prow[:] = [v * inv for v in prow]
    nz = [(j, v) for j, v in enumerate(prow) if v]
    for i, other in enumerate(T):
        if i == row:
            continue
        f = other[col]
        if f:
            for j, v in nz:
                other[j] -= f * v
    f = obj[col]
    if f:
        for j, v in nz:
            obj[j] -= f * v


def solve_farkas(A: Sequence[Sequence[int]], max_pivots: int = 100_000, batch: int = 48) -> FarkasResult:
    """Decide ``exists v: A v <= -1``; rows of ``A`` are the constraints."""
    m = len(A)
    if m <= 2 * batch:
        return _solve_dense(A, max_pivots)
    arr = np.asarray(A, dtype=object)
    # start from rows spread evenly over the system
    work = sorted(set(np.linspace(0, m - 1, batch).astype(int).tolist()))
    pivots = 0
    while True:
        res = _solve_dense([A[i] for i in work], max_pivots)
        pivots += res.pivots
        if not res.feasible:
            y = [Fraction(0)] * m
            for i, v in zip(work, res.multipliers):
                y[i] = v
            return FarkasResult(False, multipliers=y, pivots=pivots)
        slack = arr.dot(np.asarray(res.point, dtype=object)) + 1
        bad = [i for i in np.argsort(-slack.astype(float), kind="stable")[:batch].tolist() if slack[i] > 0]
        if not bad:
            return FarkasResult(True, point=res.point, pivots=pivots)
        work = sorted(set(work) | set(bad))


def _solve_dense(A, max_pivots):
    m = len(A)
    if m == 0:
        raise ValueError("empty constraint system")
    d = len(A[0])
    rows = d + 1
    ncol = m + rows
    T = []
    for k in range(rows):
        line = [Fraction(0)] * (ncol + 1)
        for i in range(m):
            v = A[i][k] if k < d else 1
            if v:
                line[i] = Fraction(v)
        line[m + k] = Fraction(1)
        line[-1] = Fraction(1 if k == d else 0)
        T.append(line)
    basis = [m + k for k in range(rows)]
    obj = [Fraction(0)] * (ncol + 1)
    for line in T:
        for j in range(m):
            obj[j] -= line[j]
        obj[-1] -= line[-1]

    pivots = 0
    while True:
        col = next((j for j in range(ncol) if obj[j] < 0), None)
        if col is None:
            break
        best = None
        for i, line in enumerate(T):
            a = line[col]
            if a > 0:
                ratio = line[-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            raise ArithmeticError("phase-I objective unbounded; cannot happen")
        row = best[1]
        _pivot(T, obj, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise ArithmeticError("pivot limit exceeded")

    value = -obj[-1]
    if value == 0:
        y = [Fraction(0)] * m
        for i, b in enumerate(basis):
            if b < m:
                y[b] = T[i][-1]
        return FarkasResult(False, multipliers=y, pivots=pivots)
    pi = [1 - obj[m + k] for k in range(rows)]
    point = [v / pi[d] for v in pi[:d]]
    return FarkasResult(True, point=point, pivots=pivots)
