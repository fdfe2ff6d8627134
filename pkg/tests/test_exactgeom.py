"""Exact geometry: rationals, linear algebra, double description, simplex."""
import itertools
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncpolytope.exactgeom.dd import extreme_rays
from ncpolytope.exactgeom.linalg import nullspace_and_rank, rank, rref, solve_affine
from ncpolytope.exactgeom.lp import solve_lp
from ncpolytope.exactgeom.polytope import (EmptyPolytope, HPolytope, UnboundedPolytope, VPolytope,
                                           affine_hull, canonical_row, enumerate_facets,
                                           enumerate_vertices)
from ncpolytope.exactgeom.rational import format_rational, parse_rational, primitive, to_rational


# -- independent oracles ----------------------------------------------------------------

def _solve_square(M, r):
    """Unique solution of a square rational system, or None."""
    n = len(M)
    rows = [list(M[i]) + [r[i]] for i in range(n)]
    R, piv = rref(rows)
    if len(piv) < n or any(p >= n for p in piv):
        return None
    return tuple(R[i][n] for i in range(n))


def brute_vertices(A, b, n):
    """Every feasible basic solution obtained from n tight constraints."""
    out = set()
    for idx in itertools.combinations(range(len(A)), n):
        v = _solve_square([A[i] for i in idx], [b[i] for i in idx])
        if v is None:
            continue
        if all(sum(a * x for a, x in zip(A[i], v)) <= b[i] for i in range(len(A))):
            out.add(v)
    return out


def brute_facets(V, n):
    """Supporting hyperplanes through n affinely independent vertices (full-dimensional V)."""
    out = set()
    for idx in itertools.combinations(range(len(V)), n):
        pts = [V[i] for i in idx]
        # normal a with a.(p - p0) = 0 for all p
        diffs = [[p[j] - pts[0][j] for j in range(n)] for p in pts[1:]]
        r, ker = nullspace_and_rank(diffs, n)
        if r != n - 1:
            continue
        a = ker[0]
        c = sum(x * y for x, y in zip(a, pts[0]))
        vals = [sum(x * y for x, y in zip(a, v)) for v in V]
        if all(x <= c for x in vals):
            out.add(canonical_row(a, c))
        if all(x >= c for x in vals):
            out.add(canonical_row([-x for x in a], -c))
    return out


def _rows(h):
    return {canonical_row(a, c) for a, c in zip(h.A, h.b)}


small_int = st.integers(-4, 4)


@st.composite
def bounded_hpolytope(draw, n=3, extra=5):
    """Box [-3,3]^n intersected with random half-spaces containing the origin."""
    A, b = [], []
    for i in range(n):
        e = [0] * n
        e[i] = 1
        A.append(tuple(e)); b.append(3)
        e = [0] * n
        e[i] = -1
        A.append(tuple(e)); b.append(3)
    for _ in range(extra):
        a = tuple(draw(st.lists(small_int, min_size=n, max_size=n)))
        if not any(a):
            continue
        A.append(a)
        b.append(draw(st.integers(1, 6)))
    return HPolytope(tuple(A), tuple(b), dim=n)


# -- rationals ----------------------------------------------------------------------------

@pytest.mark.parametrize("text,value", [("3/4", F(3, 4)), ("-2", F(-2)), ("6/8", F(3, 4)),
                                        ("0.25", F(1, 4))])
def test_parse_rational(text, value):
    assert parse_rational(text) == value


@given(st.fractions(max_denominator=50))
def test_rational_text_round_trip(q):
    assert parse_rational(format_rational(q)) == q


def test_inexact_floats_rejected():
    assert to_rational(2.0) == 2
    with pytest.raises(TypeError):
        to_rational(0.1)


def test_primitive_divides_gcd():
    assert primitive([4, -6, 8]) == [2, -3, 4]


# -- linear algebra ------------------------------------------------------------------------

def test_identity_rank_and_kernel():
    I = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    r, ker = nullspace_and_rank(I, 3)
    assert r == 3 and ker == []


def test_zero_matrix_rank():
    r, ker = nullspace_and_rank([[0, 0], [0, 0]], 2)
    assert r == 0 and len(ker) == 2


def test_s7_difference_rank():
    from ncpolytope.scenario import get_scenario
    s = get_scenario("s7")
    (g,) = s.prep_equivs
    diffs = [[a - b for a, b in zip(v, g[0])] for v in g[1:]]
    assert len(diffs) == 7
    # oracle: numpy rank of the same integer matrix (entries are quarters)
    assert rank(diffs) == np.linalg.matrix_rank(np.array(diffs, dtype=float) * 4) == 4


@given(st.lists(st.lists(small_int, min_size=4, max_size=4), min_size=1, max_size=5))
def test_rank_nullity(M):
    r, ker = nullspace_and_rank(M, 4)
    assert r + len(ker) == 4
    for k in ker:
        assert all(sum(a * x for a, x in zip(row, k)) == 0 for row in M)
    assert r == np.linalg.matrix_rank(np.array(M, dtype=float))


def test_solve_affine_particular_solution():
    sol = solve_affine([[1, 1, 0], [0, 1, 1]], [2, 3], 3)
    x0 = sol[0] if isinstance(sol, tuple) else sol
    assert x0[0] + x0[1] == 2 and x0[1] + x0[2] == 3


# -- vertex enumeration ---------------------------------------------------------------------

def test_unit_square_vertices():
    h = HPolytope(((1, 0), (-1, 0), (0, 1), (0, -1)), (1, 0, 1, 0), dim=2)
    v = enumerate_vertices(h)
    assert list(v.vertices) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_s1_preparation_vertices():
    # q >= 0, q0 + q1 = 2, q2 + q3 = 2
    A = tuple(tuple(-int(i == j) for j in range(4)) for i in range(4))
    h = HPolytope(A, (0,) * 4, ((1, 1, 0, 0), (0, 0, 1, 1)), (2, 2), dim=4)
    v = set(enumerate_vertices(h).vertices)
    assert v == {(2, 0, 2, 0), (2, 0, 0, 2), (0, 2, 2, 0), (0, 2, 0, 2)}


@given(bounded_hpolytope())
def test_vertices_match_basic_solution_oracle(h):
    v = enumerate_vertices(h)
    assert set(v.vertices) == brute_vertices(h.A, h.b, 3)
    # exact re-verification, no tolerance
    for x in v.vertices:
        assert h.contains(x)


@given(bounded_hpolytope(), st.randoms(use_true_random=False))
def test_vertices_independent_of_row_order(h, rnd):
    idx = list(range(len(h.A)))
    rnd.shuffle(idx)
    h2 = HPolytope(tuple(h.A[i] for i in idx), tuple(h.b[i] for i in idx), dim=h.dim)
    assert enumerate_vertices(h).vertices == enumerate_vertices(h2).vertices


def test_empty_and_unbounded_detection():
    with pytest.raises(EmptyPolytope):
        enumerate_vertices(HPolytope(((1,), (-1,)), (0, -1), dim=1))
    with pytest.raises(UnboundedPolytope):
        enumerate_vertices(HPolytope(((-1, 0), (0, -1)), (0, 0), dim=2))


def test_extreme_rays_of_orthant():
    rays = extreme_rays([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert sorted(map(tuple, rays)) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


# -- facet enumeration ----------------------------------------------------------------------

def test_square_facets():
    h = enumerate_facets(VPolytope(((0, 0), (0, 1), (1, 0), (1, 1)), dim=2))
    assert len(h.A) == 4 and not h.E


@given(st.lists(st.tuples(small_int, small_int, small_int), min_size=5, max_size=7, unique=True))
def test_facets_match_hyperplane_oracle(pts):
    pts = [tuple(F(x) for x in p) for p in pts]
    if rank([[p[j] - pts[0][j] for j in range(3)] for p in pts[1:]]) < 3:
        return   # oracle assumes a full-dimensional hull
    h = enumerate_facets(VPolytope(tuple(pts), dim=3))
    assert _rows(h) == brute_facets(pts, 3)


@given(bounded_hpolytope())
def test_round_trip_h_to_v_to_h(h):
    v = enumerate_vertices(h)
    h2 = enumerate_facets(v)
    # every original row is valid on the recovered polytope (LP containment) and vice versa
    for a, c in zip(h.A, h.b):
        res = solve_lp(a, h2, "max")
        assert res.status == "optimal" and res.value <= c
    for a, c in zip(h2.A, h2.b):
        res = solve_lp(a, h, "max")
        assert res.status == "optimal" and res.value == c   # facets are tight


def test_facets_tight_on_affinely_spanning_vertices():
    from ncpolytope.pipeline import meas_polytope, prep_polytope, product_polytope
    from ncpolytope.scenario import get_scenario
    s = get_scenario("s1")
    prod = product_polytope(prep_polytope(s), meas_polytope(s))
    h = enumerate_facets(prod)
    assert len(h.A) == 24
    hull_dim = len(prod.vertices[0]) - rank(h.E) if h.E else len(prod.vertices[0])
    for a, c in zip(h.A, h.b):
        tight = [v for v in prod.vertices if sum(x * y for x, y in zip(a, v)) == c]
        assert rank([[x - y for x, y in zip(t, tight[0])] for t in tight[1:]]) == hull_dim - 1


def test_affine_hull_of_segment():
    E, f = affine_hull([(F(0), F(0)), (F(1), F(1))])[:2]
    assert rank(E) == 1


# -- LP --------------------------------------------------------------------------------------

def test_lp_unit_square():
    h = HPolytope(((1, 0), (-1, 0), (0, 1), (0, -1)), (1, 0, 1, 0), dim=2)
    res = solve_lp((1, 0), h, "max")
    assert res.status == "optimal" and res.value == 1 and res.x[0] == 1


@given(bounded_hpolytope(), st.lists(small_int, min_size=3, max_size=3))
def test_lp_matches_vertex_scan(h, c):
    best = max(sum(a * x for a, x in zip(c, v)) for v in enumerate_vertices(h).vertices)
    res = solve_lp(c, h, "max")
    assert res.status == "optimal" and res.value == best
    assert solve_lp(c, h, "min").value == min(sum(a * x for a, x in zip(c, v))
                                              for v in enumerate_vertices(h).vertices)


@given(bounded_hpolytope(), st.lists(small_int, min_size=3, max_size=3))
def test_lp_against_scipy(h, c):
    from scipy.optimize import linprog
    res = solve_lp(c, h, "max")
    ref = linprog([-x for x in c], A_ub=np.array(h.A, float), b_ub=np.array(h.b, float),
                  bounds=(None, None), method="highs")
    assert abs(float(res.value) + ref.fun) < 1e-7


def test_lp_infeasible_has_farkas_certificate():
    # x <= 0, -x <= -1 (x >= 1)
    h = HPolytope(((1,), (-1,)), (0, -1), dim=1)
    res = solve_lp((1,), h, "max")
    assert res.status == "infeasible"
    y = res.certificate[:2]
    assert all(v >= 0 for v in y)
    assert y[0] * 1 + y[1] * -1 == 0 and y[0] * 0 + y[1] * -1 < 0


def test_lp_unbounded():
    h = HPolytope(((-1, 0),), (0,), dim=2)
    assert solve_lp((1, 0), h, "max").status == "unbounded"


def test_identity_decomposition_of_product_vertex():
    from ncpolytope.pipeline import nc_membership, product_polytope, prep_polytope, meas_polytope
    from ncpolytope.scenario import get_scenario
    s = get_scenario("s1")
    prep, meas = prep_polytope(s), meas_polytope(s)
    q, xi = prep.vertices[0], meas.vertices[0]
    # behaviour of a single deterministic ontic state: p(z|x,y) = xi(z|y) for each x with q>0
    p = [m for _ in range(s.nx) for m in xi]
    res = nc_membership(p, s, prep=prep, meas=meas)
    assert res.member and abs(sum(res.weights) - 1) == 0
