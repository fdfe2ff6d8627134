"""From a scenario to its noncontextuality inequalities.

The preparation polytope ``{q >= 0 : sum_x alpha_{x|s} q(x) = 1 for all s}``
and the measurement polytope (response functions obeying normalisation and
the measurement equivalences) are enumerated separately. Outer products of
their vertices span the extended polytope, whose facets are computed and
then intersected with the normalisation constraints by substituting the
dependent probabilities (see :class:`~ncpolytope.scenario.ReducedBasis`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exactgeom.linalg import dot
from .exactgeom.lp import solve_lp
from .exactgeom.polytope import (HPolytope, VPolytope, canonical_row, enumerate_facets,
                                 enumerate_vertices)
from .exactgeom.rational import format_rational, rvec
from .scenario import ReducedBasis, Scenario, reduced_basis

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-9


class InvalidBehavior(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Inequality:
    """``sum_i coeffs[i] * p_i <= bound`` over the flattened behaviour."""

    coeffs: Tuple[Fraction, ...]
    bound: Fraction

    def __post_init__(self):
        object.__setattr__(self, "coeffs", rvec(self.coeffs))
        object.__setattr__(self, "bound", Fraction(self.bound))

    @classmethod
    def canonical(cls, coeffs, bound) -> "Inequality":
        """Integer-cleared, gcd-1 form (positive rescaling only)."""
        a, c = canonical_row(rvec(coeffs), Fraction(bound))
        return cls(a, c)

    def value(self, p: Sequence) -> float:
        return sum(float(c) * float(v) for c, v in zip(self.coeffs, p) if c)

    def exact_value(self, p: Sequence) -> Fraction:
        return dot(self.coeffs, rvec(p))

    def is_vacuous(self) -> bool:
        return not any(self.coeffs)

    def format(self, s: Scenario) -> str:
        """``coef*p[z|x,y] + ... <= C`` with exact rationals."""
        lab = s.labels()
        terms = [f"{format_rational(c)}*p[{lab[i][0]}|{lab[i][1]},{lab[i][2]}]"
                 for i, c in enumerate(self.coeffs) if c]
        lhs = " + ".join(terms) if terms else "0"
        return f"{lhs} <= {format_rational(self.bound)}"


def parse_inequality(text: str, s: Scenario) -> Inequality:
    """Inverse of :meth:`Inequality.format`."""
    import re
    lhs, _, rhs = text.partition("<=")
    coeffs = [Fraction(0)] * s.n_coords
    for term in lhs.split(" + "):
        term = term.strip()
        if not term or term == "0":
            continue
        m = re.fullmatch(r"(-?[0-9/]+)\*p\[(\d+)\|(\d+),(\d+)\]", term)
        if m is None:
            raise ValueError(f"cannot parse term {term!r}")
        c, z, x, y = m.groups()
        coeffs[s.index(int(x), int(y), int(z))] += Fraction(c)
    return Inequality(tuple(coeffs), Fraction(rhs.strip()))


def binary_inequality(s: Scenario, terms: Dict[Tuple[int, int], object], bound) -> Inequality:
    """Inequality over ``p(0|x,y)`` given as ``{(x, y): coeff}``."""
    coeffs = [Fraction(0)] * s.n_coords
    for (x, y), c in terms.items():
        coeffs[s.index(x, y, 0)] = Fraction(c)
    return Inequality(tuple(coeffs), Fraction(bound))


def outcome_inequality(s: Scenario, terms: Dict[Tuple[int, int, int], object], bound) -> Inequality:
    """Inequality given as ``{(z, x, y): coeff}``."""
    coeffs = [Fraction(0)] * s.n_coords
    for (z, x, y), c in terms.items():
        coeffs[s.index(x, y, z)] = Fraction(c)
    return Inequality(tuple(coeffs), Fraction(bound))


# -- polytopes -----------------------------------------------------------------

def prep_polytope(s: Scenario) -> VPolytope:
    """Vertices ``q(x|e_p)`` of ``{q >= 0, sum_x alpha_{x|s} q(x) = 1}``."""
    n = s.nx
    A = [[-Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    b = [Fraction(0)] * n
    E = [v for g in s.prep_equivs for v in g]
    f = [Fraction(1)] * len(E)
    return enumerate_vertices(HPolytope(A, b, E, f, n))


def meas_polytope(s: Scenario) -> VPolytope:
    """Vertices ``xi(z|y,e_m)`` of the response-function polytope."""
    n = s.ny * s.nz
    A = [[-Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    b = [Fraction(0)] * n
    E, f = [], []
    for y in range(s.ny):
        E.append([Fraction(int(k // s.nz == y)) for k in range(n)])
        f.append(Fraction(1))
    for g in s.meas_equivs:
        for u, v in zip(g, g[1:]):
            E.append([a - c for a, c in zip(u, v)])
            f.append(Fraction(0))
    return enumerate_vertices(HPolytope(A, b, E, f, n))


def product_polytope(prep: VPolytope, meas: VPolytope) -> VPolytope:
    """All outer products ``q(x) * xi(z|y)`` flattened x-major."""
    verts = [tuple(qx * m for qx in q for m in xi) for q in prep.vertices for xi in meas.vertices]
    return VPolytope(tuple(verts), prep.dim * meas.dim)


def extended_facets(prod: VPolytope) -> Tuple[List[Inequality], HPolytope]:
    """Facets of the extended polytope in full coordinates.

    Returns the canonicalised facet list and the raw H-representation
    (whose equality rows describe the affine hull).
    """
    h = enumerate_facets(prod)
    ineqs = [Inequality.canonical(a, c) for a, c in zip(h.A, h.b)]
    return ineqs, h


def reduce(ineq: Inequality, basis: ReducedBasis) -> Inequality:
    """Impose normalisation and the equivalences, then canonicalise."""
    coeffs, bound = basis.substitute(ineq.coeffs, ineq.bound)
    if not any(coeffs):
        return Inequality(tuple(coeffs), Fraction(int(bound > 0) - int(bound < 0)))
    return Inequality.canonical(coeffs, bound)


def trivial_inequalities(basis: ReducedBasis) -> set:
    """Reduced forms of every ``p(z|x,y) >= 0`` and ``p(z|x,y) <= 1``."""
    out = set()
    n = basis.scenario.n_coords
    for i in range(n):
        for sign, bound in ((-1, 0), (1, 1)):
            c = [Fraction(0)] * n
            c[i] = Fraction(sign)
            r = reduce(Inequality(tuple(c), Fraction(bound)), basis)
            if not r.is_vacuous():
                out.add(r)
    return out


def classify_trivial(ineq: Inequality, basis: ReducedBasis, _cache: Optional[set] = None) -> bool:
    """True iff ``ineq`` is the reduction of a positivity or unit bound."""
    triv = _cache if _cache is not None else trivial_inequalities(basis)
    return ineq in triv


# -- orchestration -------------------------------------------------------------

@dataclass
class PipelineResult:
    scenario: Scenario
    prep: VPolytope
    meas: VPolytope
    product: VPolytope
    raw_facets: List[Inequality]
    affine_hull: HPolytope
    basis: ReducedBasis
    reduced: List[Inequality]          # one per raw facet, same order
    distinct: List[Inequality]         # deduplicated, nonvacuous, sorted
    trivial: List[bool]                # aligned with ``distinct``
    vacuous_count: int = 0

    @property
    def nontrivial(self) -> List[Inequality]:
        return [q for q, t in zip(self.distinct, self.trivial) if not t]

    @property
    def trivial_count(self) -> int:
        """Raw facets whose reduction is trivial."""
        triv = {q for q, t in zip(self.distinct, self.trivial) if t}
        return sum(1 for r in self.reduced if r in triv)

    @property
    def nontrivial_raw_count(self) -> int:
        nontriv = set(self.nontrivial)
        return sum(1 for r in self.reduced if r in nontriv)


def run_pipeline(s: Scenario) -> PipelineResult:
    prep = prep_polytope(s)
    meas = meas_polytope(s)
    prod = product_polytope(prep, meas)
    logger.info("%s: %d prep x %d meas vertices -> %d product vertices",
                s.name, len(prep), len(meas), len(prod))
    raw, h = extended_facets(prod)
    basis = reduced_basis(s)
    reduced = [reduce(q, basis) for q in raw]
    vacuous = sum(1 for r in reduced if r.is_vacuous())
    distinct = sorted({r for r in reduced if not r.is_vacuous()})
    triv = trivial_inequalities(basis)
    flags = [q in triv for q in distinct]
    return PipelineResult(s, prep, meas, prod, raw, h, basis, reduced, distinct, flags, vacuous)


# -- membership ----------------------------------------------------------------

@dataclass
class MembershipResult:
    member: bool
    weights: Optional[List] = None            # over product vertices
    separating: Optional[Inequality] = None   # valid for P_NCP, violated by p


def _check_behavior(p, s: Scenario, tol):
    from .scenario import constraint_system
    E, f = constraint_system(s)
    exact = tol == 0
    for row, fv in zip(E, f):
        lhs = sum(c * v for c, v in zip(row, p) if c)
        if (lhs != fv) if exact else abs(float(lhs) - float(fv)) > tol:
            raise InvalidBehavior("behaviour violates normalisation or an equivalence")
    for v in p:
        if (v < 0) if exact else float(v) < -tol:
            raise InvalidBehavior("negative probability")


def nc_membership(p: Sequence, s: Scenario, product: Optional[VPolytope] = None,
                  prep: Optional[VPolytope] = None, meas: Optional[VPolytope] = None
                  ) -> MembershipResult:
    """Decide whether ``p`` admits a noncontextual model.

    Looks for convex weights ``nu`` over product vertices with
    ``sum nu * q.xi = p`` and ``sum nu * q(x) = 1``. Rational input is solved
    exactly; float input with a tolerance of 1e-9.
    """
    exact = all(isinstance(v, (int, Fraction)) for v in p)
    p = rvec(p) if exact else [float(v) for v in p]
    _check_behavior(p, s, 0 if exact else 1e-7)
    prep = prep or prep_polytope(s)
    meas = meas or meas_polytope(s)
    pairs = [(q, xi) for q in prep.vertices for xi in meas.vertices]
    n = s.n_coords
    # rows: n behaviour rows, nx normalisation rows, 1 convexity row
    cols = []
    for q, xi in pairs:
        col = [qx * m for qx in q for m in xi] + list(q) + [Fraction(1)]
        cols.append(col)
    rhs = list(p) + [1] * s.nx + [1]
    if exact:
        return _membership_exact(cols, rhs, n, s)
    return _membership_float(cols, rhs, n, s)


def _membership_exact(cols, rhs, n, s):
    m = len(rhs)
    k = len(cols)
    E = [[cols[j][i] for j in range(k)] for i in range(m)]
    A = [[-Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    b = [Fraction(0)] * k
    res = solve_lp([Fraction(0)] * k, HPolytope(A, b, E, rhs, k), "max")
    if res.status == "optimal":
        return MembershipResult(True, weights=list(res.x))
    # Farkas: y_A >= 0, y_E with y_A^T A + y_E^T E = 0 and y.b + y_E.rhs < 0.
    # With A = -I this gives y_E^T col_j = y_A[j] >= 0 for every vertex pair,
    # so g(p) := -y_E[:n].p satisfies g <= y_E[n:].(1..1) on P_NCP while p breaks it.
    yE = res.certificate[k:]
    coeffs = [-v for v in yE[:n]]
    bound = sum(yE[n:], Fraction(0))
    return MembershipResult(False, separating=Inequality.canonical(coeffs, bound))


def _membership_float(cols, rhs, n, s):
    from scipy.optimize import linprog
    M = np.array([[float(v) for v in c] for c in cols]).T
    r = np.array([float(v) for v in rhs])
    k = M.shape[1]
    # feasibility with slack minimisation: M nu + sp - sm = r
    m = M.shape[0]
    A_eq = np.hstack([M, np.eye(m), -np.eye(m)])
    c = np.concatenate([np.zeros(k), np.ones(2 * m)])
    res = linprog(c, A_eq=A_eq, b_eq=r, bounds=(0, None), method="highs")
    if res.status == 0 and res.fun <= MEMBERSHIP_TOL:
        return MembershipResult(True, weights=list(res.x[:k]))
    # separating functional from the dual of the slack LP
    y = -np.asarray(res.eqlin.marginals)
    coeffs = [-float(v) for v in y[:n]]
    bound = float(np.sum(y[n:]))
    return MembershipResult(False, separating=_float_inequality(coeffs, bound))


def _float_inequality(coeffs, bound) -> Inequality:
    scale = max(1e-300, max(abs(c) for c in list(coeffs) + [bound]))
    q = [Fraction(c / scale).limit_denominator(10 ** 9) for c in coeffs]
    return Inequality(tuple(q), Fraction(bound / scale).limit_denominator(10 ** 9))
