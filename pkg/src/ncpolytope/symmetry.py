"""Relabelling symmetries of a scenario and orbit classification of inequalities.

A symmetry relabels preparations by a permutation and measurement effects by
``(y, z) -> (sigma(y), pi_y(z))``. It is admitted when it maps the set of
product vertices onto itself. Since ``q`` and ``xi`` are recovered from
``q (x) xi`` (``q(x) = sum_z q(x) xi(z|y)``), this holds exactly when the
preparation part fixes the preparation vertex set and the measurement part
fixes the measurement vertex set, so the two factors are searched apart.
"""
from __future__ import annotations

import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exactgeom.polytope import VPolytope
from .pipeline import Inequality
from .scenario import ReducedBasis, Scenario

DEFAULT_CAP = math.factorial(10)


class SearchTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioSymmetry:
    """``(x, y, z) -> (prep_perm[x], setting_perm[y], outcome_perms[y][z])``."""

    prep_perm: Tuple[int, ...]
    setting_perm: Tuple[int, ...]
    outcome_perms: Tuple[Tuple[int, ...], ...]

    @classmethod
    def identity(cls, nx, ny, nz):
        return cls(tuple(range(nx)), tuple(range(ny)), tuple(tuple(range(nz)) for _ in range(ny)))

    def meas_map(self, y, z):
        return self.setting_perm[y], self.outcome_perms[y][z]

    def coord_perm(self, s: Scenario) -> List[int]:
        """``perm[i]`` is the image of full coordinate ``i``."""
        out = [0] * s.n_coords
        for x in range(s.nx):
            for y in range(s.ny):
                for z in range(s.nz):
                    y2, z2 = self.meas_map(y, z)
                    out[s.index(x, y, z)] = s.index(self.prep_perm[x], y2, z2)
        return out

    def compose(self, other: "ScenarioSymmetry") -> "ScenarioSymmetry":
        """``self o other`` (apply ``other`` first)."""
        px = tuple(self.prep_perm[i] for i in other.prep_perm)
        sy = tuple(self.setting_perm[other.setting_perm[y]] for y in range(len(other.setting_perm)))
        oz = tuple(tuple(self.outcome_perms[other.setting_perm[y]][other.outcome_perms[y][z]]
                         for z in range(len(other.outcome_perms[y])))
                   for y in range(len(other.setting_perm)))
        return ScenarioSymmetry(px, sy, oz)

    def inverse(self) -> "ScenarioSymmetry":
        px = _inv(self.prep_perm)
        sy = _inv(self.setting_perm)
        oz = [None] * len(sy)
        for y, y2 in enumerate(self.setting_perm):
            oz[y2] = _inv(self.outcome_perms[y])
        return ScenarioSymmetry(px, sy, tuple(oz))

    def is_identity(self):
        return self == ScenarioSymmetry.identity(len(self.prep_perm), len(self.setting_perm),
                                                 len(self.outcome_perms[0]))

    def format(self) -> str:
        outs = ";".join(_cycles(p) for p in self.outcome_perms)
        return f"prep={_cycles(self.prep_perm)} settings={_cycles(self.setting_perm)} outcomes=[{outs}]"


def _inv(p):
    q = [0] * len(p)
    for i, j in enumerate(p):
        q[j] = i
    return tuple(q)


def _cycles(p) -> str:
    seen, parts = set(), []
    for i in range(len(p)):
        if i in seen or p[i] == i:
            seen.add(i)
            continue
        cyc, j = [], i
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = p[j]
        parts.append("(" + " ".join(map(str, cyc)) + ")")
    return "".join(parts) or "()"


def _parse_cycles(text: str, n: int) -> Tuple[int, ...]:
    p = list(range(n))
    for cyc in re.findall(r"\(([^()]*)\)", text):
        items = [int(v) for v in cyc.split()]
        for a, b in zip(items, items[1:] + items[:1]):
            p[a] = b
    if sorted(p) != list(range(n)):
        raise ValueError(f"not a permutation: {text!r}")
    return tuple(p)


def parse_symmetry(line: str, s: Scenario) -> ScenarioSymmetry:
    m = re.fullmatch(r"\s*prep=(.*?)\s+settings=(.*?)\s+outcomes=\[(.*)\]\s*", line)
    if m is None:
        raise ValueError(f"cannot parse symmetry line {line!r}")
    outs = m.group(3).split(";")
    if len(outs) != s.ny:
        raise ValueError("one outcome permutation per setting expected")
    return ScenarioSymmetry(_parse_cycles(m.group(1), s.nx), _parse_cycles(m.group(2), s.ny),
                            tuple(_parse_cycles(o, s.nz) for o in outs))


# -- search --------------------------------------------------------------------

def _prep_symmetries(prep: VPolytope, nx: int, cap: int) -> List[Tuple[int, ...]]:
    if math.factorial(nx) > cap:
        raise SearchTooLarge(f"{nx}! preparation permutations exceed the search cap {cap}")
    verts = set(prep.vertices)
    # a coordinate can only move to one with the same multiset of values
    fp = [tuple(sorted(Counter(v[x] for v in prep.vertices).items())) for x in range(nx)]
    cand = [[j for j in range(nx) if fp[j] == fp[i]] for i in range(nx)]
    out = []

    def rec(i, perm, used):
        if i == nx:
            img = {tuple(v[_inv(perm)[k]] for k in range(nx)) for v in prep.vertices}
            if img == verts:
                out.append(tuple(perm))
            return
        for j in cand[i]:
            if j not in used:
                perm.append(j)
                used.add(j)
                rec(i + 1, perm, used)
                used.discard(j)
                perm.pop()

    rec(0, [], set())
    return out


def _meas_symmetries(meas: VPolytope, ny: int, nz: int):
    verts = set(meas.vertices)
    out = []
    zperms = list(itertools.permutations(range(nz)))
    for sy in itertools.permutations(range(ny)):
        for oz in itertools.product(zperms, repeat=ny):
            img = set()
            for v in meas.vertices:
                w = [None] * (ny * nz)
                for y in range(ny):
                    for z in range(nz):
                        w[sy[y] * nz + oz[y][z]] = v[y * nz + z]
                img.add(tuple(w))
            if img == verts:
                out.append((tuple(sy), tuple(oz)))
    return out


@dataclass
class SymmetryGroup:
    scenario: Scenario
    prep_part: List[Tuple[int, ...]]
    meas_part: List[Tuple[tuple, tuple]]

    def __len__(self):
        return len(self.prep_part) * len(self.meas_part)

    def elements(self) -> Iterable[ScenarioSymmetry]:
        for p in self.prep_part:
            for sy, oz in self.meas_part:
                yield ScenarioSymmetry(p, sy, oz)

    def __iter__(self):
        return self.elements()

    def __contains__(self, g: ScenarioSymmetry):
        return (g.prep_perm in set(self.prep_part)
                and (g.setting_perm, g.outcome_perms) in set(self.meas_part))

    def generators(self) -> List[ScenarioSymmetry]:
        """A small generating set (greedy, per factor)."""
        s = self.scenario
        ident = ScenarioSymmetry.identity(s.nx, s.ny, s.nz)
        gens = []
        for p in _greedy_generators(self.prep_part, lambda a, b: tuple(a[i] for i in b)):
            gens.append(ScenarioSymmetry(p, ident.setting_perm, ident.outcome_perms))
        meas_syms = [ScenarioSymmetry(ident.prep_perm, sy, oz) for sy, oz in self.meas_part]
        gens += _greedy_generators(meas_syms, lambda a, b: a.compose(b))
        return gens


def _greedy_generators(elems, mul):
    elems = list(elems)
    if not elems:
        return []
    ident = elems[0]
    # closure of the chosen generators, grown each time a new one is added
    closure = {ident} if _is_ident(ident) else set()
    gens = []
    for g in sorted(elems, key=repr):
        if g in closure or _is_ident(g):
            continue
        gens.append(g)
        closure = _close(gens, mul, closure | {g})
    return gens


def _is_ident(g):
    if isinstance(g, ScenarioSymmetry):
        return g.is_identity()
    return tuple(g) == tuple(range(len(g)))


def _close(gens, mul, start):
    seen = set(start)
    frontier = list(seen)
    while frontier:
        new = []
        for a in frontier:
            for g in gens:
                b = mul(g, a)
                if b not in seen:
                    seen.add(b)
                    new.append(b)
        frontier = new
    return seen


def find_symmetries(s: Scenario, prod: Optional[VPolytope] = None, cap: int = DEFAULT_CAP,
                    prep: Optional[VPolytope] = None, meas: Optional[VPolytope] = None
                    ) -> SymmetryGroup:
    """All relabellings that fix the product-vertex set.

    ``prod`` is accepted for interface symmetry; the factor polytopes are
    used for the search and recomputed when not supplied.
    """
    from .pipeline import meas_polytope, prep_polytope
    prep = prep or prep_polytope(s)
    meas = meas or meas_polytope(s)
    return SymmetryGroup(s, _prep_symmetries(prep, s.nx, cap), _meas_symmetries(meas, s.ny, s.nz))


def apply_to_vertex(g: ScenarioSymmetry, s: Scenario, v: Sequence) -> tuple:
    perm = g.coord_perm(s)
    out = [None] * len(v)
    for i, j in enumerate(perm):
        out[j] = v[i]
    return tuple(out)


# -- action on reduced inequalities ---------------------------------------------

class _Action:
    """Integer matrix acting on ``(c_free, C)`` for one symmetry."""

    def __init__(self, g: ScenarioSymmetry, basis: ReducedBasis):
        s = basis.scenario
        perm = g.coord_perm(s)
        free = basis.free
        k = len(free)
        pos = {i: j for j, i in enumerate(free)}
        T = [[Fraction(0)] * (k + 1) for _ in range(k + 1)]
        for col, i in enumerate(free):
            t = perm[i]
            if t in pos:
                T[pos[t]][col] += 1
            else:
                for r in range(k):
                    T[r][col] += basis.matrix[t][r]
                T[k][col] -= basis.offset[t]
        T[k][k] = Fraction(1)
        den = 1
        for row in T:
            for v in row:
                den = den * v.denominator // math.gcd(den, v.denominator)
        self.M = np.array([[int(v * den) for v in row] for row in T], dtype=object)


def _to_vec(ineq: Inequality, basis: ReducedBasis):
    return [int(ineq.coeffs[i]) for i in basis.free] + [int(ineq.bound)]


def _canon(v):
    g = 0
    for x in v:
        g = math.gcd(g, int(x))
    return tuple(int(x) // g for x in v) if g > 1 else tuple(int(x) for x in v)


def _from_vec(v, basis: ReducedBasis) -> Inequality:
    n = basis.scenario.n_coords
    c = [Fraction(0)] * n
    for j, i in enumerate(basis.free):
        c[i] = Fraction(v[j])
    return Inequality(tuple(c), Fraction(v[-1]))


def apply_symmetry(g: ScenarioSymmetry, ineq: Inequality, basis: ReducedBasis) -> Inequality:
    """Relabel a reduced inequality and re-reduce it (canonical form)."""
    from .pipeline import reduce
    perm = g.coord_perm(basis.scenario)
    c = [Fraction(0)] * len(ineq.coeffs)
    for i, v in enumerate(ineq.coeffs):
        if v:
            c[perm[i]] += v
    return reduce(Inequality(tuple(c), ineq.bound), basis)


@dataclass
class InequalityClass:
    representative: Inequality
    orbit_size: int
    members: List[Inequality] = field(default_factory=list)


def orbit_classify(ineqs: Sequence[Inequality], group, basis: ReducedBasis) -> List[InequalityClass]:
    """Partition reduced inequalities into symmetry orbits.

    ``group`` is a :class:`SymmetryGroup` or any iterable of symmetries
    generating the group. Orbits are closed under the action, so elements
    outside ``ineqs`` are counted in ``orbit_size`` when reached.
    """
    gens = group.generators() if isinstance(group, SymmetryGroup) else list(group)
    acts = [_Action(g, basis) for g in gens if not g.is_identity()]
    vecs = {}
    for q in ineqs:
        if any(q.coeffs[i] for i in range(len(q.coeffs)) if i not in set(basis.free)):
            raise ValueError("inequality is not in reduced coordinates")
        if any(v.denominator != 1 for v in q.coeffs) or q.bound.denominator != 1:
            q = Inequality.canonical(q.coeffs, q.bound)
        vecs[_canon(_to_vec(q, basis))] = q
    assigned: Dict[tuple, int] = {}
    orbits: List[List[tuple]] = []
    for start in sorted(vecs):
        if start in assigned:
            continue
        oid = len(orbits)
        orbit = [start]
        assigned[start] = oid
        frontier = [start]
        while frontier:
            F = np.array(frontier, dtype=object)
            nxt = []
            for a in acts:
                imgs = F @ a.M.T
                for row in imgs:
                    w = _canon(row)
                    if w not in assigned:
                        assigned[w] = oid
                        orbit.append(w)
                        nxt.append(w)
            frontier = nxt
        orbits.append(orbit)
    classes = []
    for orbit in orbits:
        members = sorted(_from_vec(w, basis) for w in orbit)
        classes.append(InequalityClass(members[0], len(orbit), members))
    classes.sort(key=lambda c: (c.orbit_size, c.representative))
    return classes


# -- orbits of raw facets ---------------------------------------------------------

def _vertex_perm(g: ScenarioSymmetry, s: Scenario, verts: Sequence[tuple]) -> List[int]:
    index = {v: i for i, v in enumerate(verts)}
    try:
        return [index[apply_to_vertex(g, s, v)] for v in verts]
    except KeyError:
        raise ValueError(f"{g.format()} does not fix the product-vertex set") from None


@dataclass
class FacetClass:
    """Orbit of raw facets, labelled by its least reduced form."""

    representative: Inequality
    orbit_size: int                 # raw facets in the orbit
    reduced_forms: int              # distinct reduced forms among them
    trivial: bool
    members: List[int] = field(default_factory=list)   # raw facet indices


def classify_facets(result, gens: Sequence[ScenarioSymmetry]) -> List[FacetClass]:
    """Group the raw facets of a pipeline result into orbits.

    A facet is identified by the set of product vertices it contains, which
    the symmetries permute; this avoids any dependence on how a facet row
    is written modulo the affine-hull equations.
    """
    s = result.scenario
    verts = result.product.vertices
    keys = []
    for q in result.raw_facets:
        keys.append(frozenset(i for i, v in enumerate(verts) if q.exact_value(v) == q.bound))
    where = {k: i for i, k in enumerate(keys)}
    if len(where) != len(keys):
        raise ValueError("two facets share a vertex set")
    perms = [_vertex_perm(g, s, verts) for g in gens if not g.is_identity()]
    triv = {q for q, t in zip(result.distinct, result.trivial) if t}
    seen = [False] * len(keys)
    classes = []
    for i0 in range(len(keys)):
        if seen[i0]:
            continue
        seen[i0] = True
        orbit, frontier = [i0], [i0]
        while frontier:
            nxt = []
            for i in frontier:
                for p in perms:
                    j = where.get(frozenset(p[v] for v in keys[i]))
                    if j is None:
                        raise ValueError("symmetry maps a facet outside the facet list")
                    if not seen[j]:
                        seen[j] = True
                        orbit.append(j)
                        nxt.append(j)
            frontier = nxt
        red = {result.reduced[i] for i in orbit}
        rep = min(red)
        classes.append(FacetClass(rep, len(orbit), len(red), rep in triv, sorted(orbit)))
    classes.sort(key=lambda c: (c.trivial, c.orbit_size, c.representative))
    return classes


# -- generators quoted for the builtin scenarios ---------------------------------
#
# Preparation entries are lists of transpositions applied together. Measurement
# entries: ("flip", y) swaps outcomes 0,1 of setting y; ("flipall",) swaps them
# for every setting at once; ("swap", y1, y2) exchanges two settings;
# ("twist",) exchanges settings 0,1 while flipping the outcomes of setting 1.

_PAIRS6 = [[(0, 1)], [(2, 3)], [(4, 5)], [(0, 2), (1, 3)], [(0, 4), (1, 5)], [(2, 4), (3, 5)],
           [(0, 3), (1, 2)], [(0, 5), (1, 4)], [(2, 5), (3, 4)]]
_CUBE_OPS = [[(0, 1), (6, 7), (2, 3), (4, 5)], [(0, 4), (3, 7), (2, 6), (1, 5)],
             [(0, 7), (3, 4), (2, 6), (1, 5)], [(0, 4), (3, 7), (2, 5), (1, 6)],
             [(0, 7), (3, 4), (2, 5), (1, 6)], [(0, 6), (1, 7)]]
_SETTINGS3 = [("swap", 0, 1), ("swap", 1, 2), ("swap", 0, 2)]

LISTED = {
    "s1": ([[(0, 1)], [(2, 3)]], [("flip", 0), ("flip", 1), ("swap", 0, 1)]),
    "s2": ([[(1, 2)]], [("flip", 0), ("flip", 1), ("flip", 2)] + _SETTINGS3),
    "s3": ([[(0, 1)], [(2, 3)], [(2, 4)], [(3, 4)]],
           [("flip", 0), ("flip", 1), ("swap", 0, 1), ("twist",)]),
    "s4": ([[(0, 1)], [(2, 3)]], [("flip", 0), ("flip", 1), ("swap", 0, 1), ("twist",)]),
    "s5": ([[(0, 1)], [(2, 3)], [(4, 5)]], [("flip", 0), ("flip", 1), ("flip", 2)] + _SETTINGS3),
    "s6": ([[(a, b)] for a, b in itertools.combinations(range(4), 2)]
           + [[(4, 5)], [(4, 6)], [(5, 6)]],
           [("flip", 0), ("flip", 1), ("flip", 2)] + _SETTINGS3),
    "s7": (_CUBE_OPS, [("flip", 0), ("flip", 1), ("flip", 2)] + _SETTINGS3),
    "s8": (_CUBE_OPS, [("flipall",)] + _SETTINGS3),
    "s9": (_PAIRS6, [("flipall",), ("swap", 0, 1)]),
}


def _meas_op(op, ny, nz):
    sy = list(range(ny))
    oz = [list(range(nz)) for _ in range(ny)]
    flip = lambda p: [1, 0] + p[2:]
    if op[0] == "flip":
        oz[op[1]] = flip(oz[op[1]])
    elif op[0] == "flipall":
        oz = [flip(p) for p in oz]
    elif op[0] == "swap":
        sy[op[1]], sy[op[2]] = op[2], op[1]
    elif op[0] == "twist":
        sy[0], sy[1] = 1, 0
        oz[1] = flip(oz[1])
    else:
        raise ValueError(f"unknown measurement operation {op!r}")
    return tuple(sy), tuple(tuple(p) for p in oz)


def listed_generators(key: str, s: Scenario) -> List[ScenarioSymmetry]:
    """Generators quoted alongside each builtin scenario's table."""
    preps, meas = LISTED[key]
    ident = ScenarioSymmetry.identity(s.nx, s.ny, s.nz)
    out = []
    for transps in preps:
        p = list(range(s.nx))
        for a, b in transps:
            p[a], p[b] = b, a
        out.append(ScenarioSymmetry(tuple(p), ident.setting_perm, ident.outcome_perms))
    for op in meas:
        sy, oz = _meas_op(op, s.ny, s.nz)
        out.append(ScenarioSymmetry(ident.prep_perm, sy, oz))
    return out
