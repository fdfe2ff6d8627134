"""Prepare-and-measure contextuality scenarios.

A scenario fixes the numbers of preparations ``nx``, measurement settings
``ny`` and outcomes ``nz`` together with groups of operationally equivalent
convex mixtures. Preparation mixtures are vectors of length ``nx``;
measurement mixtures are vectors of length ``ny * nz`` indexed by
``k = y * nz + z``.

Behaviours ``p(z|x,y)`` are flattened with ``index = (x * ny + y) * nz + z``
throughout the package (see :func:`coord_index`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .exactgeom.linalg import nullspace_and_rank, solve_affine
from .exactgeom.rational import format_rational, rvec


class ScenarioError(ValueError):
    pass


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


def coord_index(x: int, y: int, z: int, ny: int, nz: int) -> int:
    return (x * ny + y) * nz + z


def _group_rank(groups: Sequence[Sequence[tuple]], width: int) -> int:
    diffs = []
    for g in groups:
        for u, v in zip(g, g[1:]):
            diffs.append([a - b for a, b in zip(u, v)])
    if not diffs:
        return 0
    r, _ = nullspace_and_rank(diffs, width)
    return r


@dataclass(frozen=True)
class Scenario:
    name: str
    nx: int
    ny: int
    nz: int
    prep_equivs: Tuple[Tuple[tuple, ...], ...]
    meas_equivs: Tuple[Tuple[tuple, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "prep_equivs",
                           tuple(tuple(rvec(v) for v in g) for g in self.prep_equivs))
        object.__setattr__(self, "meas_equivs",
                           tuple(tuple(rvec(v) for v in g) for g in self.meas_equivs))
        self._validate()

    def _validate(self):
        for label, n in (("nx", self.nx), ("ny", self.ny), ("nz", self.nz)):
            if not isinstance(n, int) or n < 1:
                raise ValidationError(f"{label} must be a positive integer, got {n!r}")
        if not self.prep_equivs:
            raise ValidationError("at least one preparation equivalence is required")
        for kind, groups, width in (("preparation", self.prep_equivs, self.nx),
                                    ("measurement", self.meas_equivs, self.ny * self.nz)):
            for g in groups:
                if len(g) < 2:
                    raise ValidationError(f"{kind} equivalence group needs >= 2 mixtures")
                if len(set(g)) != len(g):
                    raise ValidationError(f"{kind} equivalence group repeats a mixture")
                for v in g:
                    if len(v) != width:
                        raise ValidationError(
                            f"{kind} vector has length {len(v)}, expected {width}")
                    if any(c < 0 for c in v):
                        raise ValidationError(f"negative coefficient in {kind} vector")
                    if sum(v) != 1:
                        raise ValidationError(
                            f"{kind} vector sums to {format_rational(sum(v))}, not 1")
        if self.n_s >= self.nx:
            raise ValidationError("preparation equivalences leave no free preparation")

    @property
    def n_s(self) -> int:
        """Number of independent preparation equivalence conditions."""
        return _group_rank(self.prep_equivs, self.nx)

    @property
    def n_t(self) -> int:
        """Number of independent measurement equivalence conditions."""
        return _group_rank(self.meas_equivs, self.ny * self.nz)

    @property
    def n_coords(self) -> int:
        return self.nx * self.ny * self.nz

    def index(self, x: int, y: int, z: int) -> int:
        return coord_index(x, y, z, self.ny, self.nz)

    def labels(self) -> List[Tuple[int, int, int]]:
        """``(z, x, y)`` label of every flattened coordinate."""
        return [(z, x, y) for x in range(self.nx) for y in range(self.ny) for z in range(self.nz)]


# -- file format ---------------------------------------------------------------

def _parse_vec(text: str, lineno: int) -> tuple:
    try:
        return tuple(Fraction(tok) for tok in text.split())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"line {lineno}: bad rational in {text!r}") from exc


def parse_scenario(text: str) -> Scenario:
    """Parse the line-oriented scenario format.

    ::

        name s1
        nx 4
        ny 2
        nz 2
        prep_equiv 1/2 1/2 0 0 | 0 0 1/2 1/2
    """
    fields: Dict[str, object] = {}
    preps, meas = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "name":
            if not rest:
                raise ParseError(f"line {lineno}: empty name")
            fields["name"] = rest
        elif key in ("nx", "ny", "nz"):
            try:
                fields[key] = int(rest)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {key} needs an integer") from exc
        elif key in ("prep_equiv", "meas_equiv"):
            group = tuple(_parse_vec(part, lineno) for part in rest.split("|"))
            if any(len(v) == 0 for v in group):
                raise ParseError(f"line {lineno}: empty vector")
            (preps if key == "prep_equiv" else meas).append(group)
        else:
            raise ParseError(f"line {lineno}: unknown keyword {key!r}")
    missing = [k for k in ("nx", "ny", "nz") if k not in fields]
    if missing:
        raise ParseError(f"missing field(s): {', '.join(missing)}")
    return Scenario(str(fields.get("name", "scenario")), fields["nx"], fields["ny"],
                    fields["nz"], tuple(preps), tuple(meas))


def format_scenario(s: Scenario) -> str:
    def vec(v):
        return " ".join(format_rational(c) for c in v)
    lines = [f"name {s.name}", f"nx {s.nx}", f"ny {s.ny}", f"nz {s.nz}"]
    for g in s.prep_equivs:
        lines.append("prep_equiv " + " | ".join(vec(v) for v in g))
    for g in s.meas_equivs:
        lines.append("meas_equiv " + " | ".join(vec(v) for v in g))
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- reduced coordinates -------------------------------------------------------

@dataclass(frozen=True)
class ReducedBasis:
    """Independent coordinates and the affine substitution for all others.

    Every full coordinate ``i`` equals ``offset[i] + sum_j matrix[i][j] * t_j``
    where ``t`` are the values of the independent coordinates ``free``.
    """

    scenario: Scenario
    free: Tuple[int, ...]
    offset: Tuple[Fraction, ...]
    matrix: Tuple[Tuple[Fraction, ...], ...]

    @property
    def labels(self) -> List[Tuple[int, int, int]]:
        lab = self.scenario.labels()
        return [lab[i] for i in self.free]

    def expand(self, t: Sequence) -> List[Fraction]:
        """Full behaviour from independent coordinate values."""
        return [o + sum((m * v for m, v in zip(row, t)), Fraction(0))
                for o, row in zip(self.offset, self.matrix)]

    def project(self, p: Sequence) -> List:
        return [p[i] for i in self.free]

    def substitute(self, coeffs: Sequence, bound) -> Tuple[List[Fraction], Fraction]:
        """Rewrite ``coeffs . p <= bound`` over the independent coordinates.

        Returns a full-length coefficient vector that is zero on eliminated
        coordinates, and the new bound.
        """
        coeffs = rvec(coeffs)
        n = len(self.free)
        red = [Fraction(0)] * n
        const = Fraction(0)
        for c, o, row in zip(coeffs, self.offset, self.matrix):
            if c:
                const += c * o
                for j in range(n):
                    if row[j]:
                        red[j] += c * row[j]
        full = [Fraction(0)] * len(coeffs)
        for j, i in enumerate(self.free):
            full[i] = red[j]
        return full, Fraction(bound) - const

    def substitution_text(self) -> List[str]:
        """Human-readable elimination formulas, one per eliminated coordinate."""
        lab = self.scenario.labels()
        out = []
        for i, (o, row) in enumerate(zip(self.offset, self.matrix)):
            if i in self.free:
                continue
            terms = []
            if o:
                terms.append(format_rational(o))
            for j, c in enumerate(row):
                if c:
                    z, x, y = lab[self.free[j]]
                    terms.append(f"{format_rational(c)}*p[{z}|{x},{y}]")
            z, x, y = lab[i]
            out.append(f"p[{z}|{x},{y}] = " + (" + ".join(terms) if terms else "0"))
        return out


def constraint_system(s: Scenario):
    """Affine equations satisfied by every normalised, equivalence-respecting behaviour."""
    n = s.n_coords
    E, f = [], []
    for x in range(s.nx):
        for y in range(s.ny):
            row = [Fraction(0)] * n
            for z in range(s.nz):
                row[s.index(x, y, z)] = Fraction(1)
            E.append(row)
            f.append(Fraction(1))
    for g in s.prep_equivs:
        for u, v in zip(g, g[1:]):
            for y in range(s.ny):
                for z in range(s.nz):
                    row = [Fraction(0)] * n
                    for x in range(s.nx):
                        row[s.index(x, y, z)] = u[x] - v[x]
                    E.append(row)
                    f.append(Fraction(0))
    for g in s.meas_equivs:
        for u, v in zip(g, g[1:]):
            for x in range(s.nx):
                row = [Fraction(0)] * n
                for y in range(s.ny):
                    for z in range(s.nz):
                        row[s.index(x, y, z)] = u[y * s.nz + z] - v[y * s.nz + z]
                E.append(row)
                f.append(Fraction(0))
    return E, f


def reduced_basis(s: Scenario) -> ReducedBasis:
    """Eliminate the last outcome by normalisation, then the highest-indexed
    preparations and measurement coordinates by the equivalence relations."""
    E, f = constraint_system(s)
    last = [s.index(x, y, s.nz - 1) for x in reversed(range(s.nx)) for y in reversed(range(s.ny))]
    rest = [s.index(x, y, z) for x in reversed(range(s.nx)) for y in reversed(range(s.ny))
            for z in reversed(range(s.nz - 1))]
    sol = solve_affine(E, f, s.n_coords, column_order=last + rest)
    if sol is None:
        raise ValidationError("equivalence conditions are inconsistent with normalisation")
    v0, N, free = sol
    return ReducedBasis(s, tuple(free), tuple(v0), tuple(tuple(r) for r in N))


# -- dimension bookkeeping -----------------------------------------------------

@dataclass(frozen=True)
class DimsReport:
    r: int
    standard_prep_dim: int   # (nx - ns) r - nx
    prep_vars: int           # nx - ns
    standard_meas_dim: int   # r (ny nz - ny - nt)
    meas_vars: int           # ny nz - ny - nt
    extended_dim: int        # nx - ns + ny nz - ny - nt


def dims_report(s: Scenario, r: Optional[int] = None) -> DimsReport:
    """Compare polytope dimensions of the product construction with the
    mu-lambda construction that needs one ontic state per measurement vertex.

    ``r`` is the number of measurement-polytope vertices; when omitted it is
    ``nz ** ny`` for scenarios without measurement equivalences and is
    computed otherwise.
    """
    if r is None:
        if not s.meas_equivs:
            r = s.nz ** s.ny
        else:
            from .pipeline import meas_polytope
            r = len(meas_polytope(s))
    ns, nt = s.n_s, s.n_t
    meas_vars = s.ny * s.nz - s.ny - nt
    return DimsReport(
        r=r,
        standard_prep_dim=(s.nx - ns) * r - s.nx,
        prep_vars=s.nx - ns,
        standard_meas_dim=r * meas_vars,
        meas_vars=meas_vars,
        extended_dim=s.nx - ns + meas_vars,
    )


# -- the nine scenarios studied ------------------------------------------------

def _uniform(nx: int, members: Sequence[int]) -> tuple:
    w = Fraction(1, len(members))
    return tuple(w if x in members else Fraction(0) for x in range(nx))


def _meas_uniform(ny: int, nz: int, effects: Sequence[Tuple[int, int]]) -> tuple:
    w = Fraction(1, len(effects))
    v = [Fraction(0)] * (ny * nz)
    for y, z in effects:
        v[y * nz + z] = w
    return tuple(v)


_CUBE = [(0, 1, 6, 7), (2, 3, 4, 5), (0, 2, 5, 7), (1, 3, 4, 6),
         (0, 3, 4, 7), (1, 2, 5, 6), (0, 3, 5, 6), (1, 2, 4, 7)]


def builtin_scenarios() -> Dict[str, Scenario]:
    """The nine scenarios, keyed ``"s1"`` ... ``"s9"``."""
    u = _uniform
    s = {}
    s["s1"] = Scenario("s1", 4, 2, 2, ((u(4, [0, 1]), u(4, [2, 3])),))
    s["s2"] = Scenario("s2", 4, 3, 2, ((u(4, [0, 1, 2]), u(4, [0, 3])),))
    s["s3"] = Scenario("s3", 5, 2, 2, ((u(5, [0, 1]), u(5, [2, 3, 4])),))
    s["s4"] = Scenario("s4", 5, 2, 2, ((u(5, [0, 1, 2, 3]), u(5, [0, 1, 4])),))
    s["s5"] = Scenario("s5", 6, 3, 2, ((u(6, [0, 1]), u(6, [2, 3]), u(6, [4, 5])),))
    s["s6"] = Scenario("s6", 7, 3, 2, ((u(7, [0, 1, 2, 3]), u(7, [4, 5, 6])),))
    cube = (tuple(u(8, g) for g in _CUBE),)
    s["s7"] = Scenario("s7", 8, 3, 2, cube)
    s["s8"] = Scenario("s8", 8, 3, 2, cube, ((
        _meas_uniform(3, 2, [(0, 0), (1, 0), (2, 0)]),
        _meas_uniform(3, 2, [(0, 1), (1, 1), (2, 1)])),))
    s["s9"] = Scenario("s9", 6, 2, 3, ((u(6, [0, 1]), u(6, [2, 3]), u(6, [4, 5])),), ((
        _meas_uniform(2, 3, [(0, 0), (1, 0)]),
        _meas_uniform(2, 3, [(0, 1), (1, 1)])),))
    return s


def get_scenario(key_or_path: str) -> Scenario:
    """Builtin key (``"s1"`` ...) or path to a scenario file."""
    table = builtin_scenarios()
    if key_or_path in table:
        return table[key_or_path]
    return load_scenario(key_or_path)
