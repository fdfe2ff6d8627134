"""Exact two-phase simplex (Bland's rule) with Farkas certificates."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from .polytope import HPolytope
from .rational import rvec

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class LPResult:
    """Outcome of :func:`solve_lp`.

    ``certificate`` is set only when ``status == "infeasible"``. It holds
    multipliers ``(y_A, y_E)`` with ``y_A >= 0``,
    ``y_A^T A + y_E^T E = 0`` and ``y_A.b + y_E.f < 0``.
    """

    status: str                     # "optimal" | "infeasible" | "unbounded"
    x: Optional[tuple] = None
    value: Optional[Fraction] = None
    certificate: Optional[tuple] = None


def _is_sign_row(a, bi):
    """Index ``j`` if the row reads ``-v_j <= 0``, else ``None``."""
    if bi != 0:
        return None
    nz = [j for j, v in enumerate(a) if v != 0]
    if len(nz) == 1 and a[nz[0]] < 0:
        return nz[0]
    return None


class _Tableau:
    """Dense tableau ``[B^{-1} A | B^{-1} b]`` with a basis list."""

    def __init__(self, rows, rhs, basis):
        self.T = [list(r) + [v] for r, v in zip(rows, rhs)]
        self.basis = list(basis)

    def pivot(self, r, c):
        T = self.T
        inv = ONE / T[r][c]
        T[r] = [v * inv for v in T[r]]
        pr = T[r]
        for i in range(len(T)):
            if i != r and T[i][c] != 0:
                f = T[i][c]
                T[i] = [a - f * b for a, b in zip(T[i], pr)]
        self.basis[r] = c

    def run(self, cost, allowed):
        """Minimise ``cost`` over the current basis. Returns 'optimal' or 'unbounded'."""
        T = self.T
        while True:
            cb = [cost[b] for b in self.basis]
            enter = None
            for j in allowed:
                if j in self.basis:
                    continue
                red = cost[j] - sum((cb[i] * T[i][j] for i in range(len(T)) if T[i][j]), ZERO)
                if red < 0:
                    enter = j
                    break
            if enter is None:
                return "optimal"
            best = None
            for i in range(len(T)):
                a = T[i][enter]
                if a > 0:
                    ratio = T[i][-1] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            self.pivot(best[1], enter)

    def duals(self, cost, art_cols):
        """``y = c_B^T B^{-1}`` read off the identity (artificial) columns."""
        T = self.T
        cb = [cost[b] for b in self.basis]
        return [sum((cb[i] * T[i][c] for i in range(len(T)) if T[i][c]), ZERO) for c in art_cols]


def solve_lp(c: Sequence, h: HPolytope, sense: str = "max") -> LPResult:
    """Optimise ``c.v`` over ``{A v <= b, E v = f}`` in exact arithmetic."""
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    n = h.dim
    c = rvec(c)
    obj = [-v for v in c] if sense == "max" else list(c)

    signed = set()
    gen_rows = []
    for i, (a, bi) in enumerate(zip(h.A, h.b)):
        j = _is_sign_row(a, bi)
        if j is not None:
            signed.add(j)
        else:
            gen_rows.append(i)
    # columns: nonnegative vars as-is, free vars split, one slack per general row
    cols = []            # (kind, index, sign)
    for j in range(n):
        cols.append(("v", j, 1))
        if j not in signed:
            cols.append(("v", j, -1))
    for i in gen_rows:
        cols.append(("s", i, 1))
    ncol = len(cols)

    rows, rhs = [], []
    for i in gen_rows:
        a = h.A[i]
        rows.append([a[j] * sg if k == "v" else (ONE if j == i else ZERO) for k, j, sg in cols])
        rhs.append(h.b[i])
    for e, fv in zip(h.E, h.f):
        rows.append([e[j] * sg if k == "v" else ZERO for k, j, sg in cols])
        rhs.append(fv)
    m = len(rows)
    flip = [ONE] * m
    for i in range(m):
        if rhs[i] < 0:
            flip[i] = -ONE
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
    # phase 1 with artificial columns ncol .. ncol+m-1
    full = [r + [ONE if k == i else ZERO for k in range(m)] for i, r in enumerate(rows)]
    tab = _Tableau(full, rhs, range(ncol, ncol + m))
    cost1 = [ZERO] * ncol + [ONE] * m
    tab.run(cost1, range(ncol + m))
    phase1 = sum((tab.T[i][-1] for i in range(m) if tab.basis[i] >= ncol), ZERO)
    if phase1 > 0:
        y = tab.duals(cost1, range(ncol, ncol + m))
        y = [yi * fl for yi, fl in zip(y, flip)]
        return LPResult("infeasible", certificate=_farkas(h, gen_rows, signed, y))

    # drive artificials out of the basis where possible
    for i in range(m):
        if tab.basis[i] >= ncol:
            j = next((j for j in range(ncol) if tab.T[i][j] != 0), None)
            if j is not None:
                tab.pivot(i, j)
    cost2 = []
    for k, j, sg in cols:
        cost2.append(obj[j] * sg if k == "v" else ZERO)
    cost2 += [ZERO] * m
    status = tab.run(cost2, range(ncol))
    if status == "unbounded":
        return LPResult("unbounded")
    vals = [ZERO] * (ncol + m)
    for i, b in enumerate(tab.basis):
        vals[b] = tab.T[i][-1]
    x = [ZERO] * n
    for idx, (k, j, sg) in enumerate(cols):
        if k == "v":
            x[j] += sg * vals[idx]
    value = sum((a * b for a, b in zip(c, x)), ZERO)
    return LPResult("optimal", tuple(x), value)


def _farkas(h, gen_rows, signed, y):
    """Turn phase-one duals into ``(y_A, y_E)``.

    The phase-one optimum supplies ``y`` with ``A'^T y <= 0`` and
    ``b'.y > 0``; negating it and absorbing the residual on nonnegative
    variables into the sign rows gives the certificate.
    """
    n = h.dim
    ng = len(gen_rows)
    yA = [ZERO] * len(h.A)
    for i, yi in zip(gen_rows, y[:ng]):
        yA[i] = -yi
    yE = [-v for v in y[ng:]]
    resid = [ZERO] * n
    for i in gen_rows:
        if yA[i]:
            for j, a in enumerate(h.A[i]):
                resid[j] += yA[i] * a
    for e, ye in zip(h.E, yE):
        if ye:
            for j, a in enumerate(e):
                resid[j] += ye * a
    done = set()
    for i, (a, bi) in enumerate(zip(h.A, h.b)):
        j = _is_sign_row(a, bi)
        if j is not None and j not in done:
            done.add(j)
            # row is -a_j e_j with a_j < 0 scale; choose multiplier to cancel resid[j]
            yA[i] = resid[j] / (-a[j])
    return tuple(yA) + tuple(yE)
