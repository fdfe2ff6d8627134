"""Exact H- and V-representations and conversion between them."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import List, Optional, Sequence, Tuple

from .dd import extreme_rays
from .linalg import dot, rref, solve_affine
from .rational import integer_row, lcm_denominators, rvec


class PolytopeError(ValueError):
    pass


class UnboundedPolytope(PolytopeError):
    pass


class EmptyPolytope(PolytopeError):
    pass


@dataclass(frozen=True)
class HPolytope:
    """``{v : A v <= b, E v = f}`` in ``dim`` ambient coordinates."""

    A: Tuple[tuple, ...]
    b: tuple
    E: Tuple[tuple, ...] = ()
    f: tuple = ()
    dim: int = 0

    def __post_init__(self):
        A = tuple(rvec(r) for r in self.A)
        E = tuple(rvec(r) for r in self.E)
        dim = self.dim or (len(A[0]) if A else (len(E[0]) if E else 0))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", rvec(self.b))
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "f", rvec(self.f))
        object.__setattr__(self, "dim", dim)
        if len(self.A) != len(self.b) or len(self.E) != len(self.f):
            raise ValueError("row counts of (A, b) or (E, f) disagree")
        if any(len(r) != dim for r in A + E):
            raise ValueError("row length differs from ambient dimension")

    def contains(self, v: Sequence) -> bool:
        v = rvec(v)
        return (all(dot(a, v) <= bi for a, bi in zip(self.A, self.b))
                and all(dot(e, v) == fi for e, fi in zip(self.E, self.f)))

    def slack(self, v: Sequence) -> List[Fraction]:
        v = rvec(v)
        return [bi - dot(a, v) for a, bi in zip(self.A, self.b)]


@dataclass(frozen=True)
class VPolytope:
    """Convex hull of finitely many rational points, stored sorted and deduplicated."""

    vertices: Tuple[tuple, ...]
    dim: int = 0

    def __post_init__(self):
        verts = tuple(sorted(set(rvec(v) for v in self.vertices)))
        dim = self.dim or (len(verts[0]) if verts else 0)
        if any(len(v) != dim for v in verts):
            raise ValueError("vertex length differs from ambient dimension")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "dim", dim)

    def __len__(self):
        return len(self.vertices)


def affine_hull(points: Sequence[Sequence[Fraction]]):
    """Equations ``E v = f`` of the affine hull and a coordinate chart.

    Returns ``(E, f, chart)`` where ``chart`` lists coordinate indices whose
    projection is injective on the hull (its length is the hull dimension).
    """
    pts = [rvec(p) for p in points]
    n = len(pts[0])
    base = pts[0]
    diffs = [[a - b for a, b in zip(p, base)] for p in pts[1:]]
    if not diffs:
        E = [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]
        return E, list(base), []
    R, chart = rref(diffs)
    pivset = set(chart)
    # column fc of the differences is a combination of the pivot columns,
    # which gives one equation per non-pivot coordinate
    E, f = [], []
    for fc in range(n):
        if fc in pivset:
            continue
        row = [Fraction(0)] * n
        row[fc] = Fraction(1)
        for r, pc in zip(R, chart):
            row[pc] -= r[fc]
        E.append(tuple(row))
        f.append(dot(row, base))
    return E, f, sorted(chart)


def enumerate_vertices(h: HPolytope, order: str = "lexmin") -> VPolytope:
    """Extreme points of ``{v : A v <= b, E v = f}``.

    Raises :class:`EmptyPolytope` when infeasible and
    :class:`UnboundedPolytope` when a ray or line is present.
    """
    n = h.dim
    sol = solve_affine(list(h.E), list(h.f), n)
    if sol is None:
        raise EmptyPolytope("equality system is inconsistent")
    v0, N, free = sol
    k = len(free)
    if k == 0:
        if not h.contains(v0):
            raise EmptyPolytope("the unique affine point violates an inequality")
        return VPolytope((tuple(v0),), n)
    # constraints in chart coordinates t: (A N) t <= b - A v0
    rows = []
    for a, bi in zip(h.A, h.b):
        an = [dot(a, [N[i][j] for i in range(n)]) for j in range(k)]
        rhs = bi - dot(a, v0)
        # homogenised: rhs * t0 - an . t >= 0
        rows.append(integer_row([rhs] + [-x for x in an]))
    rows.append([1] + [0] * k)  # t0 >= 0
    if _rank_int(rows) < k + 1:
        raise UnboundedPolytope("feasible region contains a line")
    rays = extreme_rays(rows, order)
    verts = []
    for r in rays:
        if r[0] == 0:
            raise UnboundedPolytope("feasible region has a recession direction")
        t = [Fraction(x, r[0]) for x in r[1:]]
        verts.append(tuple(v0[i] + sum((N[i][j] * t[j] for j in range(k)), Fraction(0))
                           for i in range(n)))
    if not verts:
        raise EmptyPolytope("no feasible point")
    return VPolytope(tuple(verts), n)


def _rank_int(rows):
    return len(rref(rows)[1])


def enumerate_facets(v: VPolytope, order: str = "lexmin") -> HPolytope:
    """Irredundant facets of ``conv(v)`` plus the equations of its affine hull.

    Facets are computed as extreme rays of the homogenised polar cone
    ``{(c, a) : c - a.u >= 0 for every vertex u}`` in a coordinate chart of
    the affine hull, then lifted back by padding with zeros.
    """
    if not v.vertices:
        raise EmptyPolytope("no vertices given")
    n = v.dim
    E, f, chart = affine_hull(v.vertices)
    k = len(chart)
    if k == 0:
        return HPolytope((), (), tuple(E), tuple(f), n)
    rows = []
    for u in v.vertices:
        uc = [u[j] for j in chart]
        rows.append(integer_row([Fraction(1)] + [-x for x in uc]))
    rays = extreme_rays(rows, order)
    A, b = [], []
    for r in rays:
        a = [Fraction(0)] * n
        for j, x in zip(chart, r[1:]):
            a[j] = Fraction(x)
        A.append(tuple(a))
        b.append(Fraction(r[0]))
    A, b = _sort_rows(A, b)
    return HPolytope(tuple(A), tuple(b), tuple(E), tuple(f), n)


def _sort_rows(A, b):
    pairs = sorted(zip(A, b))
    return [p[0] for p in pairs], [p[1] for p in pairs]


def canonical_row(a: Sequence[Fraction], c: Fraction) -> Tuple[tuple, Fraction]:
    """Scale ``a.v <= c`` by a positive factor to coprime integers."""
    vals = list(a) + [c]
    m = lcm_denominators(vals)
    ints = [int(x * m) for x in vals]
    g = 0
    for x in ints:
        g = gcd(g, x)
    if g > 1:
        ints = [x // g for x in ints]
    return tuple(Fraction(x) for x in ints[:-1]), Fraction(ints[-1])
