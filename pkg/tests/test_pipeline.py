"""Polytope construction, reduction, trivial filtering and membership."""
import itertools
from fractions import Fraction as F
from functools import lru_cache

import pytest

from ncpolytope.exactgeom.polytope import HPolytope
from ncpolytope.pipeline import (InvalidBehavior, Inequality, binary_inequality,
                                 classify_trivial, meas_polytope, nc_membership,
                                 parse_inequality, prep_polytope, product_polytope, reduce,
                                 run_pipeline, trivial_inequalities)
from ncpolytope.scenario import Scenario, get_scenario, reduced_basis

FAST = ["s1", "s2", "s3", "s4"]


@lru_cache(maxsize=None)
def pipeline(key):
    return run_pipeline(get_scenario(key))


def basic_solutions(A, b, E, f, n):
    """Oracle: vertices as feasible unique solutions of n independent tight rows."""
    from ncpolytope.exactgeom.linalg import rref
    out = set()
    for idx in itertools.combinations(range(len(A)), n - len(E)):
        M = [list(A[i]) + [b[i]] for i in idx] + [list(e) + [c] for e, c in zip(E, f)]
        R, piv = rref(M)
        if len(piv) < n or n in piv:
            continue
        v = tuple(R[i][n] for i in range(n))
        if all(sum(a * x for a, x in zip(row, v)) <= c for row, c in zip(A, b)):
            out.add(v)
    return out


# -- polytopes -----------------------------------------------------------------------------

def test_s1_prep_vertices():
    assert set(prep_polytope(get_scenario("s1")).vertices) == {
        (2, 0, 2, 0), (2, 0, 0, 2), (0, 2, 2, 0), (0, 2, 0, 2)}


def test_s2_prep_vertices_match_oracle():
    s = get_scenario("s2")
    n = s.nx
    A = [[-F(int(i == j)) for j in range(n)] for i in range(n)]
    E = [v for g in s.prep_equivs for v in g]
    got = set(prep_polytope(s).vertices)
    assert got == basic_solutions(A, [F(0)] * n, E, [F(1)] * len(E), n)


def test_s1_meas_vertices_deterministic():
    v = meas_polytope(get_scenario("s1")).vertices
    assert set(v) == {(a, 1 - a, b, 1 - b) for a in (0, 1) for b in (0, 1)}


def test_single_binary_measurement():
    s = Scenario("one", 3, 1, 2, (((F(1), F(0), F(0)), (F(0), F(1, 2), F(1, 2))),))
    assert set(meas_polytope(s).vertices) == {(1, 0), (0, 1)}


def test_s9_meas_vertices_match_oracle():
    s = get_scenario("s9")
    n = s.ny * s.nz
    A = [[-F(int(i == j)) for j in range(n)] for i in range(n)]
    E = []
    f = []
    for y in range(s.ny):
        E.append([F(int(k // s.nz == y)) for k in range(n)])
        f.append(F(1))
    for g in s.meas_equivs:
        for u, v in zip(g, g[1:]):
            E.append([a - b for a, b in zip(u, v)])
            f.append(F(0))
    assert set(meas_polytope(s).vertices) == basic_solutions(A, [F(0)] * n, E, f, n)


def test_s1_product():
    r = pipeline("s1")
    assert len(r.product.vertices) == 16
    assert len(r.product.vertices) <= len(r.prep.vertices) * len(r.meas.vertices)


def test_single_vertex_product():
    from ncpolytope.exactgeom.polytope import VPolytope
    p = product_polytope(VPolytope(((F(1), F(2)),), 2), VPolytope(((F(0), F(1)),), 2))
    assert list(p.vertices) == [(0, 1, 0, 2)]


@pytest.mark.parametrize("key", FAST)
def test_product_vertices_respect_equivalences(key):
    s = get_scenario(key)
    r = pipeline(key)
    for v in r.product.vertices:
        for g in s.prep_equivs:
            # every mixture gives the same weighted response for each (y, z)
            for y in range(s.ny):
                for z in range(s.nz):
                    vals = {sum(a * v[s.index(x, y, z)] for x, a in enumerate(u)) for u in g}
                    assert len(vals) == 1


# -- facets ---------------------------------------------------------------------------------

@pytest.mark.parametrize("key,n", [("s1", 24), ("s2", 48), ("s3", 44), ("s4", 44)])
def test_facet_counts(key, n):
    assert len(pipeline(key).raw_facets) == n


@pytest.mark.parametrize("key", FAST)
def test_vertices_satisfy_every_facet(key):
    r = pipeline(key)
    for q in r.raw_facets:
        vals = [q.exact_value(v) for v in r.product.vertices]
        assert max(vals) == q.bound


def test_s1_table_row_present():
    s = get_scenario("s1")
    want = parse_inequality("1*p[0|1,0] + -1*p[0|2,0] + -1*p[0|0,1] + 1*p[0|2,1] <= 1", s)
    rb = reduced_basis(s)
    assert reduce(want, rb) in pipeline("s1").nontrivial


def test_s2_I2_present():
    s = get_scenario("s2")
    I2 = binary_inequality(s, {(0, 0): -1, (1, 0): 2, (0, 1): 1, (2, 1): -2}, 2)
    assert reduce(I2, reduced_basis(s)) in pipeline("s2").nontrivial


@pytest.mark.parametrize("key", FAST)
def test_reduce_idempotent(key):
    r = pipeline(key)
    for q in r.distinct:
        assert reduce(q, r.basis) == q


def test_positivity_reduction_is_trivial():
    s = get_scenario("s2")
    rb = reduced_basis(s)
    c = [F(0)] * s.n_coords
    c[s.index(0, 0, 0)] = F(-1)
    assert classify_trivial(reduce(Inequality(tuple(c), 0), rb), rb)
    triv = trivial_inequalities(rb)
    assert all(classify_trivial(t, rb, triv) for t in triv)


@pytest.mark.parametrize("key", FAST)
def test_reduce_preserves_feasible_set(key, rng):
    from ncpolytope.quantum import sample_nc_behavior
    s = get_scenario(key)
    r = pipeline(key)
    for _ in range(20):
        p, _ = sample_nc_behavior(s, rng)
        # perturb off the polytope within the affine constraints
        t = [v + F(int(rng.integers(-3, 4)), 10) for v in r.basis.project(p)]
        q = r.basis.expand(t)
        for raw, red in zip(r.raw_facets, r.reduced):
            assert (raw.exact_value(q) <= raw.bound) == (red.exact_value(q) <= red.bound)


# -- membership -----------------------------------------------------------------------------

@pytest.mark.parametrize("key", FAST + ["s7"])
def test_sampled_models_are_members_and_satisfy_facets(key, rng):
    from ncpolytope.quantum import sample_nc_behavior
    s = get_scenario(key)
    facets = pipeline(key).nontrivial if key in FAST else None
    prep, meas = prep_polytope(s), meas_polytope(s)
    n = 1000 if key == "s1" else 25
    for i in range(n):
        p, _ = sample_nc_behavior(s, rng)
        if facets is not None:
            assert all(q.exact_value(p) <= q.bound for q in facets)
        if i < 25:
            assert nc_membership(p, s, prep=prep, meas=meas).member


def test_membership_weights_obey_normalisation(rng):
    from ncpolytope.quantum import sample_nc_behavior
    s = get_scenario("s2")
    prep, meas = prep_polytope(s), meas_polytope(s)
    p, _ = sample_nc_behavior(s, rng)
    res = nc_membership(p, s, prep=prep, meas=meas)
    pairs = [(q, xi) for q in prep.vertices for xi in meas.vertices]
    w = res.weights
    assert all(v >= 0 for v in w) and sum(w) == 1
    for x in range(s.nx):
        assert sum(wi * q[x] for wi, (q, _) in zip(w, pairs)) == 1
    for x in range(s.nx):
        for y in range(s.ny):
            for z in range(s.nz):
                rec = sum(wi * q[x] * xi[y * s.nz + z] for wi, (q, xi) in zip(w, pairs))
                assert rec == p[s.index(x, y, z)]


def test_constant_behaviour_is_member():
    s = get_scenario("s7")
    # maximally mixed state: p(z|x,y) independent of x
    resp = [F(1, 3), F(1, 2), F(3, 4)]
    p = [F(0)] * s.n_coords
    for x in range(s.nx):
        for y in range(s.ny):
            p[s.index(x, y, 0)] = resp[y]
            p[s.index(x, y, 1)] = 1 - resp[y]
    assert nc_membership(p, s).member
    assert nc_membership([float(v) for v in p], s).member


def _s7_quantum_behaviour():
    from ncpolytope import golden
    from ncpolytope.quantum import SeesawConfig, seesaw
    s = get_scenario("s7")
    I7 = golden.named("s7", "I7")
    val, strat = seesaw(s, I7, 2, SeesawConfig(restarts=3, seed=1))
    return s, I7, val, strat.behavior()


def test_quantum_s7_not_member():
    s, I7, val, p = _s7_quantum_behaviour()
    assert val == pytest.approx(1.7321, abs=1e-3)
    res = nc_membership(list(p), s)
    assert not res.member
    sep = res.separating
    assert sep.value(p) > float(sep.bound) + 1e-6
    # the separator is valid on every product vertex
    prep, meas = prep_polytope(s), meas_polytope(s)
    for q in prep.vertices:
        for xi in meas.vertices:
            v = [q[x] * xi[y * s.nz + z] for x in range(s.nx) for y in range(s.ny)
                 for z in range(s.nz)]
            assert sep.value(v) <= float(sep.bound) + 1e-6


def test_exact_and_float_routes_agree(rng):
    from ncpolytope.quantum import sample_nc_behavior
    s = get_scenario("s1")
    I = pipeline("s1").nontrivial[0]
    for _ in range(10):
        p, _ = sample_nc_behavior(s, rng)
        # push towards and past the facet along a fixed direction
        for t in (F(0), F(1, 2), F(2)):
            q = [a + t * (b - a) for a, b in zip(p, _violator(s, I))]
            if any(v < 0 for v in q):
                continue
            exact = nc_membership(q, s).member
            flt = nc_membership([float(v) for v in q], s).member
            assert exact == flt
            assert exact == all(f.exact_value(q) <= f.bound for f in pipeline("s1").nontrivial)


def _violator(s, ineq):
    """A normalised behaviour respecting the equivalence that maximises ``ineq`` over
    behaviour space (a vertex of the normalised, equivalence-satisfying box)."""
    from ncpolytope.exactgeom.lp import solve_lp
    from ncpolytope.scenario import constraint_system
    E, f = constraint_system(s)
    n = s.n_coords
    A = [[-F(int(i == j)) for j in range(n)] for i in range(n)]
    res = solve_lp(ineq.coeffs, HPolytope(A, [F(0)] * n, E, f, n), "max")
    assert res.value > ineq.bound
    return res.x


def test_invalid_behaviour_rejected():
    s = get_scenario("s1")
    with pytest.raises(InvalidBehavior):
        nc_membership([F(1)] * s.n_coords, s)
