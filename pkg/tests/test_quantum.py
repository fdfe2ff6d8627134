"""Quantum strategies, see-saw, robustness and classical ontic models."""
import itertools
from fractions import Fraction as F

import numpy as np
import pytest

from ncpolytope import golden
from ncpolytope.pipeline import binary_inequality, nc_membership, outcome_inequality
from ncpolytope.quantum import (InvalidStrategy, NoViolation, OntologicalModel,
                                QuantumStrategy, SeesawConfig, coefficient_array,
                                deterministic_ontic_bound, evaluate,
                                load_strategy, noise_value, optimal_measurements_binary,
                                parse_strategy, random_effects, random_states, robustness,
                                sample_nc_behavior, save_strategy, seesaw, seesaw_runs)
from ncpolytope.scenario import Scenario, get_scenario
from ncpolytope.sdp import hermitian_basis, hermitian_coords, solve_hermitian

TOL = golden.tolerances()


# -- binary-measurement closed form ------------------------------------------------

def _one_setting(nx):
    return Scenario("one", nx, 1, 2, (((F(1),) + (F(0),) * (nx - 1),
                                       (F(0),) + (F(1, nx - 1),) * (nx - 1)),))


def test_binary_measurements_diagonal():
    s = _one_setting(2)
    ineq = binary_inequality(s, {(0, 0): 1, (1, 0): -1}, 0)
    states = np.array([np.diag([1, 0]), np.diag([0, 1])], dtype=complex)
    E = optimal_measurements_binary(states, ineq, s)
    assert np.allclose(E[0, 0], np.diag([1, 0]))
    assert np.allclose(E[0, 1], np.diag([0, 1]))


def test_binary_measurements_zero_operator():
    s = _one_setting(2)
    ineq = binary_inequality(s, {(0, 0): 1, (1, 0): -1}, 0)
    rho = np.eye(2, dtype=complex) / 2
    E = optimal_measurements_binary(np.array([rho, rho]), ineq, s)
    assert np.allclose(E[0, 0], 0)


def _sdp_measurement_value(states, C, d):
    """Oracle: max sum_{y,z} Tr(A_{yz} M_{z|y}) over POVMs, by the generic SDP."""
    ny, nz = C.shape[1], C.shape[2]
    basis = hermitian_basis(d)
    obj = np.einsum("xyz,xij->yzij", C, states).reshape(-1, d, d)
    eye = hermitian_coords(np.eye(d), basis)
    dd = d * d
    rows, rhs = [], []
    for y in range(ny):
        for k in range(dd):
            r = np.zeros(ny * nz * dd)
            for z in range(nz):
                r[(y * nz + z) * dd + k] = 1.0
            rows.append(r)
            rhs.append(eye[k])
    sol, _ = solve_hermitian(obj, np.array(rows), np.array(rhs), tol=1e-10)
    return sol.value


@pytest.mark.parametrize("seed", range(8))
def test_binary_measurements_match_sdp(seed):
    rng = np.random.default_rng(seed)
    s = get_scenario("s2")
    d = 2 + seed % 2
    states = random_states(s, d, rng)
    coeffs = {(x, y): int(rng.integers(-3, 4)) for x in range(s.nx) for y in range(s.ny)}
    ineq = binary_inequality(s, coeffs, 0)
    E = optimal_measurements_binary(states, ineq, s)
    st = QuantumStrategy(d, states, E)
    assert evaluate(st, ineq) == pytest.approx(
        _sdp_measurement_value(states, coefficient_array(ineq, s), d), abs=1e-7)


# -- see-saw -------------------------------------------------------------------------

def test_seesaw_s2():
    val, st = seesaw(get_scenario("s2"), golden.named("s2", "I2"), 2,
                     SeesawConfig(restarts=5, seed=0))
    assert val == pytest.approx(2.6458, abs=TOL["Qs"])
    st.validate(get_scenario("s2"))


def test_seesaw_s7():
    val, _ = seesaw(get_scenario("s7"), golden.named("s7", "I7"), 2,
                    SeesawConfig(restarts=3, seed=0))
    assert val == pytest.approx(1.7321, abs=TOL["Qs"])


def test_seesaw_s6_no_qubit_violation():
    s = get_scenario("s6")
    val, _ = seesaw(s, golden.named("s6", "I6^2"), 2, SeesawConfig(restarts=5, seed=0))
    assert val == pytest.approx(12.0, abs=TOL["Qs"])


def test_seesaw_history_monotone():
    s = get_scenario("s2")
    for run in seesaw_runs(s, golden.named("s2", "I2"), 2, SeesawConfig(restarts=4, seed=3)):
        h = np.array(run.history)
        assert np.all(np.diff(h) >= -1e-7)
        assert run.value == pytest.approx(h.max())


def test_seesaw_thread_independent():
    s = get_scenario("s2")
    ineq = golden.named("s2", "I2")
    a = seesaw(s, ineq, 2, SeesawConfig(restarts=4, seed=5, threads=1))[0]
    b = seesaw(s, ineq, 2, SeesawConfig(restarts=4, seed=5, threads=2))[0]
    assert a == b


def test_seesaw_rejects_d1():
    with pytest.raises(ValueError):
        seesaw(get_scenario("s2"), golden.named("s2", "I2"), 1)
    with pytest.raises(ValueError):
        SeesawConfig(restarts=0)


# -- evaluation and robustness ----------------------------------------------------

def test_printed_s6_strategies():
    s = get_scenario("s6")
    st3 = load_strategy(golden.fixture_path("s6_I6_1_d3.strategy"), s)
    st4 = load_strategy(golden.fixture_path("s6_I6_4_d4.strategy"), s)
    assert evaluate(st3, golden.named("s6", "I6^1"), s) == pytest.approx(8.7764,
                                                                         abs=TOL["printed"])
    assert evaluate(st4, golden.named("s6", "I6^4"), s) == pytest.approx(15.5037,
                                                                         abs=TOL["printed"])


def test_printed_strategy_fails_strict_validation():
    s = get_scenario("s6")
    with open(golden.fixture_path("s6_I6_1_d3.strategy")) as fh:
        raw = parse_strategy(fh.read(), s)
    with pytest.raises(InvalidStrategy):
        evaluate(raw, golden.named("s6", "I6^1"), s)


@pytest.mark.parametrize("key,name", [("s2", "I2"), ("s7", "I7"), ("s6", "I6^1")])
def test_gamma_two_ways(key, name, rng):
    s = get_scenario(key)
    ineq = golden.named(key, name)
    d = 3
    st = QuantumStrategy(d, random_states(s, d, rng), random_effects(s, d, rng))
    mixed = QuantumStrategy(d, np.stack([np.eye(d) / d] * s.nx), st.effects)
    assert noise_value(st, ineq, s) == pytest.approx(evaluate(mixed, ineq), abs=1e-12)
    assert evaluate(st.mixed(1.0), ineq) == pytest.approx(noise_value(st, ineq, s), abs=1e-12)


@pytest.mark.parametrize("key,name,omega,restarts", [("s2", "I2", 0.244, 5),
                                                     ("s7", "I7", 0.423, 3)])
def test_robustness(key, name, omega, restarts):
    s = get_scenario(key)
    ineq = golden.named(key, name)
    C = ineq.bound
    _, st = seesaw(s, ineq, 2, SeesawConfig(restarts=restarts, seed=0))
    w = robustness(st, ineq, C, s)
    assert w == pytest.approx(omega, abs=TOL["omega"])
    assert evaluate(st.mixed(w), ineq) == pytest.approx(float(C), abs=1e-9)


def test_robustness_without_violation():
    s = get_scenario("s2")
    ineq = golden.named("s2", "I2")
    d = 2
    st = QuantumStrategy(d, np.stack([np.eye(d) / d] * s.nx),
                         np.stack([np.stack([np.eye(d), np.zeros((d, d))])] * s.ny))
    with pytest.raises(NoViolation):
        robustness(st, ineq, ineq.bound, s)


# -- strategy files ------------------------------------------------------------------

def test_strategy_round_trip(tmp_path, rng):
    s = get_scenario("s2")
    _, st = seesaw(s, golden.named("s2", "I2"), 2, SeesawConfig(restarts=1, seed=2))
    path = tmp_path / "st.txt"
    save_strategy(st, path)
    back = load_strategy(path, s, tol=1e-9, project=False)
    assert np.allclose(back.states, st.states, atol=1e-11)
    assert np.allclose(back.effects, st.effects, atol=1e-11)


def test_strategy_missing_last_effect():
    text = "d 2\nstate 0\n1 0\n0 0\nstate 1\n0 0\n0 1\neffect 0 0\n1 0\n0 0\n"
    st = parse_strategy(text, _one_setting(2))
    assert np.allclose(st.effects[0, 1], np.diag([0, 1]))


def test_strategy_bad_header():
    with pytest.raises(ValueError):
        parse_strategy("state 0\n1 0\n0 0\n")


# -- classical ontic models ---------------------------------------------------------

def test_deterministic_bound_s2():
    s = get_scenario("s2")
    assert deterministic_ontic_bound(s, golden.named("s2", "I2")) == 1


def test_deterministic_bound_trivial():
    s = get_scenario("s2")
    assert deterministic_ontic_bound(s, outcome_inequality(s, {(0, 0, 0): 1}, 1)) == 1


def test_deterministic_bound_single_state():
    # one ontic state shared by every preparation always satisfies the equivalences
    s = get_scenario("s2")
    assert deterministic_ontic_bound(s, golden.named("s2", "I2"), 1) <= 1
    with pytest.raises(ValueError):
        deterministic_ontic_bound(s, golden.named("s2", "I2"), 0)


def _full_enumeration_bound(s, ineq, n_lambda):
    """Oracle: all 0/1 matrices mu[l][x] with one ontic state per x, times all
    deterministic response assignments per ontic state."""
    c = ineq.coeffs
    resp = list(itertools.product(range(s.nz), repeat=s.ny))
    best = None
    for mu in itertools.product([0, 1], repeat=s.nx * n_lambda):
        M = [mu[l * s.nx:(l + 1) * s.nx] for l in range(n_lambda)]
        if any(sum(M[l][x] for l in range(n_lambda)) != 1 for x in range(s.nx)):
            continue
        if any(len({sum(F(a) * m for a, m in zip(v, M[l])) for v in g}) != 1
               for l in range(n_lambda) for g in s.prep_equivs):
            continue
        for r in itertools.product(resp, repeat=n_lambda):
            val = sum(c[s.index(x, y, r[l][y])] * M[l][x]
                      for l in range(n_lambda) for x in range(s.nx) for y in range(s.ny))
            best = val if best is None else max(best, val)
    return best


def test_deterministic_bound_s1_matches_enumeration():
    s = get_scenario("s1")
    pom = golden.named("s1", "POM")
    assert deterministic_ontic_bound(s, pom) == _full_enumeration_bound(s, pom, s.nx)


def test_two_state_model_s2():
    s = get_scenario("s2")
    model = golden.two_state_model_s2()
    model.check(s)
    p = model.behavior(s)
    I2 = golden.named("s2", "I2")
    assert I2.exact_value(p) == 2 == I2.bound
    assert nc_membership(p, s).member


def test_model_check_rejects_contextual():
    s = get_scenario("s1")
    bad = OntologicalModel([[F(1), F(0), F(1), F(0)], [F(0), F(1), F(0), F(1)]],
                           [[F(1), F(0), F(1), F(0)], [F(0), F(1), F(0), F(1)]])
    bad.check(s)       # balanced: fine
    worse = OntologicalModel([[F(1), F(1), F(0), F(0)], [F(0), F(0), F(1), F(1)]],
                             [[F(1), F(0), F(1), F(0)], [F(0), F(1), F(0), F(1)]])
    with pytest.raises(ValueError):
        worse.check(s)


@pytest.mark.parametrize("key", ["s1", "s2", "s8", "s9"])
def test_single_ontic_state_is_member(key, rng):
    s = get_scenario(key)
    p, model = sample_nc_behavior(s, rng, single=True)
    model.check(s)
    assert model.n_lambda == 1
    assert nc_membership(p, s).member


@pytest.mark.parametrize("key", ["s3", "s8", "s9"])
def test_sampled_models_valid(key, rng):
    s = get_scenario(key)
    for _ in range(5):
        p, model = sample_nc_behavior(s, rng)
        model.check(s)
        assert nc_membership(p, s).member
