"""Exact Gaussian elimination over the rationals."""
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

Matrix = List[List[Fraction]]


def as_matrix(rows: Sequence[Sequence]) -> Matrix:
    return [[Fraction(v) for v in row] for row in rows]


def rref(rows: Sequence[Sequence], column_order: Optional[Sequence[int]] = None
         ) -> Tuple[Matrix, List[int]]:
    """Reduced row echelon form.

    Parameters
    ----------
    rows : matrix with rational entries
    column_order : optional
        Order in which columns are tried as pivots. Defaults to left to right.
        Callers use this to control which coordinates get eliminated.

    Returns
    -------
    (R, pivots) where ``R`` holds only the nonzero rows and ``pivots[i]`` is
    the pivot column of row ``i``.
    """
    m = as_matrix(rows)
    if not m:
        return [], []
    ncols = len(m[0])
    order = list(range(ncols)) if column_order is None else list(column_order)
    pivots: List[int] = []
    r = 0
    for c in order:
        if r == len(m):
            break
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        pivot_row = m[r]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                row = m[i]
                m[i] = [a - f * b for a, b in zip(row, pivot_row)]
        pivots.append(c)
        r += 1
    return m[:r], pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence], ncols: Optional[int] = None) -> Matrix:
    """Basis of the right kernel ``{v : M v = 0}``, one vector per free column."""
    if not rows:
        if ncols is None:
            raise ValueError("ncols required for an empty matrix")
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    ncols = len(rows[0])
    R, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for row, pc in zip(R, pivots):
            v[pc] = -row[fc]
        basis.append(v)
    return basis


def nullspace_and_rank(rows: Sequence[Sequence], ncols: Optional[int] = None
                       ) -> Tuple[int, Matrix]:
    """Exact rank and kernel basis of a rational matrix."""
    if not rows:
        return 0, nullspace([], ncols)
    R, pivots = rref(rows)
    return len(pivots), nullspace(rows)


def solve_affine(E: Sequence[Sequence], f: Sequence, ncols: int,
                 column_order: Optional[Sequence[int]] = None):
    """Parametrise ``{v : E v = f}`` as ``v = v0 + N t``.

    Returns ``(v0, N, free)`` with ``N`` an ``ncols x len(free)`` matrix whose
    rows for free columns form the identity, or ``None`` if inconsistent.
    """
    if not E:
        eye = [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
        return [Fraction(0)] * ncols, eye, list(range(ncols))
    aug = [list(row) + [fv] for row, fv in zip(E, f)]
    order = list(range(ncols)) if column_order is None else list(column_order)
    R, pivots = rref(aug, order + [ncols])
    if ncols in pivots:
        return None
    pivset = set(pivots)
    free = [c for c in range(ncols) if c not in pivset]
    v0 = [Fraction(0)] * ncols
    for row, pc in zip(R, pivots):
        v0[pc] = row[ncols]
    N = [[Fraction(0)] * len(free) for _ in range(ncols)]
    for j, fc in enumerate(free):
        N[fc][j] = Fraction(1)
        for row, pc in zip(R, pivots):
            N[pc][j] = -row[fc]
    return v0, N, free


def matvec(M: Sequence[Sequence], v: Sequence) -> list:
    return [sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in M]


def dot(u: Sequence, v: Sequence):
    return sum((a * b for a, b in zip(u, v)), Fraction(0))
