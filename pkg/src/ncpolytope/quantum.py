"""Quantum strategies for prepare-and-measure scenarios.

A strategy assigns a density matrix ``rho_x`` to every preparation and a
POVM ``{M_{z|y}}`` to every measurement, producing
``p(z|x,y) = Tr(rho_x M_{z|y})``. This module evaluates inequalities on
strategies, searches for good strategies by alternating semidefinite
programs (see-saw), computes white-noise robustness and treats the
classical side: deterministic ontic bounds and random noncontextual models.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exactgeom.linalg import rref
from .exactgeom.lp import solve_lp
from .exactgeom.polytope import HPolytope
from .exactgeom.rational import rvec
from .pipeline import Inequality, meas_polytope, prep_polytope
from .scenario import Scenario
from .sdp import (SdpFailure, hermitian_basis, hermitian_coords, solve_hermitian)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
PRINTED_TOL = 1e-3


class InvalidStrategy(ValueError):
    pass


class NoViolation(ValueError):
    pass


class NoFeasibleModel(ValueError):
    pass


# -- scenario helpers ------------------------------------------------------------

def _differences(groups, width) -> List[List[Fraction]]:
    rows = []
    for g in groups:
        for v in g[1:]:
            rows.append([a - b for a, b in zip(v, g[0])])
    return rows


def prep_relations(s: Scenario) -> Tuple[List[int], Dict[int, List[Tuple[int, Fraction]]]]:
    """Split preparations into an independent set and affine dependents.

    Returns ``(independent, dependent)`` where ``dependent[x]`` lists
    ``(x', c)`` with ``rho_x = sum c rho_x'`` over independent ``x'``; the
    coefficients sum to one. Later preparations are eliminated first, the
    same choice as the reduced probability coordinates.
    """
    diffs = _differences(s.prep_equivs, s.nx)
    R, piv = rref(diffs, list(range(s.nx - 1, -1, -1)))
    dep = {}
    for row, p in zip(R, piv):
        dep[p] = [(j, -row[j]) for j in range(s.nx) if j != p and row[j] != 0]
    indep = [x for x in range(s.nx) if x not in dep]
    return indep, dep


def coefficient_array(ineq: Inequality, s: Scenario) -> np.ndarray:
    """Coefficients as a float array indexed ``[x, y, z]``."""
    return np.array([float(c) for c in ineq.coeffs]).reshape(s.nx, s.ny, s.nz)


def _state_constraints(s: Scenario, d: int, basis: np.ndarray):
    """Rows over stacked state coordinates: unit trace plus equivalences."""
    dd = d * d
    tr = hermitian_coords(np.eye(d), basis)
    rows, rhs = [], []
    for x in range(s.nx):
        r = np.zeros(s.nx * dd)
        r[x * dd:(x + 1) * dd] = tr
        rows.append(r)
        rhs.append(1.0)
    for diff in _differences(s.prep_equivs, s.nx):
        for k in range(dd):
            r = np.zeros(s.nx * dd)
            for x, c in enumerate(diff):
                if c:
                    r[x * dd + k] = float(c)
            rows.append(r)
            rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def _effect_constraints(s: Scenario, d: int, basis: np.ndarray):
    """Rows over stacked effect coordinates (order ``y * nz + z``)."""
    dd = d * d
    ne = s.ny * s.nz
    ident = hermitian_coords(np.eye(d), basis)
    rows, rhs = [], []
    for y in range(s.ny):
        for k in range(dd):
            r = np.zeros(ne * dd)
            for z in range(s.nz):
                r[(y * s.nz + z) * dd + k] = 1.0
            rows.append(r)
            rhs.append(ident[k])
    for diff in _differences(s.meas_equivs, ne):
        for k in range(dd):
            r = np.zeros(ne * dd)
            for e, c in enumerate(diff):
                if c:
                    r[e * dd + k] = float(c)
            rows.append(r)
            rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def _hermitize(M):
    return 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))


def _affine_project(mats: np.ndarray, rows, rhs, basis) -> np.ndarray:
    """Least-norm correction of a stack of Hermitian matrices onto ``rows v = rhs``."""
    shape = mats.shape
    v = hermitian_coords(mats.reshape(-1, shape[-2], shape[-1]), basis).ravel()
    resid = rows @ v - rhs
    if np.abs(resid).max(initial=0.0) > 0:
        v = v - np.linalg.lstsq(rows, resid, rcond=None)[0]
    dd = shape[-1] ** 2
    out = np.einsum("nk,kij->nij", v.reshape(-1, dd), basis)
    return out.reshape(shape)


def _mix_to_psd(mats: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, float]:
    """Mix every matrix toward ``target`` by the smallest common weight restoring PSD.

    ``target`` is positive definite and a multiple of the identity.
    """
    flat = mats.reshape(-1, mats.shape[-2], mats.shape[-1])
    tval = float(target[0, 0].real)
    t = 0.0
    for M in flat:
        lam = np.linalg.eigvalsh(M)[0]
        if lam < 0:
            t = max(t, -lam / (tval - lam))
    if t == 0.0:
        return mats, 0.0
    return (1 - t) * mats + t * target, t


# -- strategies --------------------------------------------------------------------

@dataclass
class QuantumStrategy:
    """States ``(nx, d, d)`` and effects ``(ny, nz, d, d)`` as complex arrays."""

    d: int
    states: np.ndarray
    effects: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=complex)
        self.effects = np.asarray(self.effects, dtype=complex)

    @property
    def nx(self):
        return self.states.shape[0]

    def behavior(self) -> np.ndarray:
        """``p(z|x,y)`` flattened in scenario coordinate order."""
        p = np.einsum("xij,yzji->xyz", self.states, self.effects).real
        return p.ravel()

    def violations(self, s: Scenario) -> Dict[str, float]:
        """Largest violation of each invariant (0 when satisfied)."""
        d = self.d
        out = {}
        if self.states.shape != (s.nx, d, d) or self.effects.shape != (s.ny, s.nz, d, d):
            raise InvalidStrategy("strategy shape does not match the scenario")
        herm = max(np.abs(self.states - _hermitize(self.states)).max(),
                   np.abs(self.effects - _hermitize(self.effects)).max())
        out["hermitian"] = float(herm)
        st = _hermitize(self.states)
        ef = _hermitize(self.effects)
        out["state_psd"] = float(max(0.0, -min(np.linalg.eigvalsh(r)[0] for r in st)))
        out["trace"] = float(np.abs(np.trace(st, axis1=1, axis2=2) - 1).max())
        out["effect_psd"] = float(max(0.0, -min(np.linalg.eigvalsh(m)[0]
                                                for m in ef.reshape(-1, d, d))))
        out["completeness"] = float(np.abs(ef.sum(axis=1) - np.eye(d)).max())
        eq = 0.0
        for diff in _differences(s.prep_equivs, s.nx):
            w = np.array([float(c) for c in diff])
            eq = max(eq, np.abs(np.einsum("x,xij->ij", w, st)).max())
        out["prep_equivalence"] = float(eq)
        eq = 0.0
        flat = ef.reshape(s.ny * s.nz, d, d)
        for diff in _differences(s.meas_equivs, s.ny * s.nz):
            w = np.array([float(c) for c in diff])
            eq = max(eq, np.abs(np.einsum("e,eij->ij", w, flat)).max())
        out["meas_equivalence"] = float(eq)
        return out

    def validate(self, s: Scenario, tol: float = DEFAULT_TOL) -> None:
        bad = {k: v for k, v in self.violations(s).items() if v > tol}
        if bad:
            worst = ", ".join(f"{k}={v:.2e}" for k, v in bad.items())
            raise InvalidStrategy(f"strategy violates invariants beyond tol {tol:g}: {worst}")

    def mixed(self, omega: float) -> "QuantumStrategy":
        """Every state mixed with white noise at weight ``omega``."""
        eye = np.eye(self.d) / self.d
        return QuantumStrategy(self.d, (1 - omega) * self.states + omega * eye, self.effects.copy())


def repair(strategy: QuantumStrategy, s: Scenario) -> QuantumStrategy:
    """Nearest-ish valid strategy.

    Hermitian parts are projected onto the linear constraints (trace,
    completeness, equivalences) and then mixed toward ``1/d`` (states) or
    ``1/nz`` (effects) just enough to be positive semidefinite. Both mixing
    steps preserve every linear constraint.
    """
    d = strategy.d
    basis = hermitian_basis(d)
    st = _hermitize(strategy.states)
    rows, rhs = _state_constraints(s, d, basis)
    st = _affine_project(st, rows, rhs, basis)
    st, _ = _mix_to_psd(st, np.eye(d) / d)
    ef = _hermitize(strategy.effects)
    rows, rhs = _effect_constraints(s, d, basis)
    ef = _affine_project(ef.reshape(-1, d, d), rows, rhs, basis).reshape(ef.shape)
    ef, _ = _mix_to_psd(ef, np.eye(d) / s.nz)
    return QuantumStrategy(d, st, ef)


def evaluate(strategy: QuantumStrategy, ineq: Inequality, s: Optional[Scenario] = None,
             tol: float = DEFAULT_TOL) -> float:
    """``sum c_{x,y,z} Tr(rho_x M_{z|y})``; validates first when ``s`` is given."""
    if s is not None:
        strategy.validate(s, tol)
    return float(np.dot([float(c) for c in ineq.coeffs], strategy.behavior()))


def noise_value(strategy: QuantumStrategy, ineq: Inequality, s: Scenario) -> float:
    """``gamma = (1/d) sum c Tr(M_{z|y})``, the value on maximally mixed states."""
    C = coefficient_array(ineq, s)
    tr = np.trace(strategy.effects, axis1=2, axis2=3).real      # (ny, nz)
    return float(np.einsum("xyz,yz->", C, tr)) / strategy.d


def robustness(strategy: QuantumStrategy, ineq: Inequality, C, s: Scenario,
               check_tol: float = 1e-9, violation_tol: float = 1e-9) -> float:
    """Critical white-noise weight ``(Q - C) / (Q - gamma)``.

    Mixing every state with ``1/d`` at this weight brings the value down to
    exactly ``C``; the function checks that before returning. Values within
    ``violation_tol`` of ``C`` count as no violation.
    """
    Q = evaluate(strategy, ineq)
    C = float(C)
    if Q <= C + violation_tol * max(1.0, abs(C)):
        raise NoViolation(f"strategy value {Q:.10g} does not exceed the bound {C:.10g}")
    gamma = noise_value(strategy, ineq, s)
    omega = (Q - C) / (Q - gamma)
    back = evaluate(strategy.mixed(omega), ineq)
    if abs(back - C) > check_tol * max(1.0, abs(C)):
        raise ArithmeticError(f"noisy strategy gives {back:.12g}, expected {C:.12g}")
    return omega


# -- strategy files ----------------------------------------------------------------

def _parse_complex(tok: str) -> complex:
    t = tok.strip().replace("i", "j")
    if t.endswith("j") and t[:-1].endswith(("+", "-")):
        t = t[:-1] + "1j"
    return complex(t)


def parse_strategy(text: str, s: Optional[Scenario] = None) -> QuantumStrategy:
    """Read ``d <n>`` then ``state x`` / ``effect y z`` blocks of ``d`` rows.

    Effects left out of the file are filled in by completeness when only the
    last outcome of a measurement is missing.
    """
    lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("d "):
        raise ValueError("strategy file must start with 'd <int>'")
    d = int(lines[0].split()[1])
    states, effects = {}, {}
    i = 1
    while i < len(lines):
        head = lines[i].split()
        body = lines[i + 1:i + 1 + d]
        if len(body) != d:
            raise ValueError(f"block {lines[i]!r} has fewer than {d} rows")
        M = np.array([[_parse_complex(t) for t in row.split()] for row in body])
        if M.shape != (d, d):
            raise ValueError(f"block {lines[i]!r} is not {d}x{d}")
        if head[0] == "state" and len(head) == 2:
            states[int(head[1])] = M
        elif head[0] == "effect" and len(head) == 3:
            effects[(int(head[1]), int(head[2]))] = M
        else:
            raise ValueError(f"unrecognised block header {lines[i]!r}")
        i += 1 + d
    nx = (s.nx if s else max(states) + 1)
    ny = (s.ny if s else max(y for y, _ in effects) + 1)
    nz = (s.nz if s else max(z for _, z in effects) + 1)
    if sorted(states) != list(range(nx)):
        raise ValueError("missing or extra states")
    E = np.zeros((ny, nz, d, d), dtype=complex)
    for y in range(ny):
        have = [z for z in range(nz) if (y, z) in effects]
        for z in have:
            E[y, z] = effects[(y, z)]
        if len(have) == nz - 1 and nz - 1 not in have:
            E[y, nz - 1] = np.eye(d) - E[y, :nz - 1].sum(axis=0)
        elif len(have) != nz:
            raise ValueError(f"effects of measurement {y} are incomplete")
    return QuantumStrategy(d, np.stack([states[x] for x in range(nx)]), E)


def format_strategy(st: QuantumStrategy, digits: int = 12) -> str:
    def c(v):
        return f"{v.real:.{digits}g}{v.imag:+.{digits}g}i"
    out = [f"d {st.d}"]
    for x, r in enumerate(st.states):
        out.append(f"state {x}")
        out += [" ".join(c(v) for v in row) for row in r]
    for y in range(st.effects.shape[0]):
        for z in range(st.effects.shape[1]):
            out.append(f"effect {y} {z}")
            out += [" ".join(c(v) for v in row) for row in st.effects[y, z]]
    return "\n".join(out) + "\n"


def load_strategy(path, s: Scenario, tol: float = PRINTED_TOL,
                  project: bool = True) -> QuantumStrategy:
    """Load a strategy file, check it to ``tol`` and optionally repair it."""
    with open(path) as fh:
        st = parse_strategy(fh.read(), s)
    st.validate(s, tol)
    return repair(st, s) if project else st


def save_strategy(st: QuantumStrategy, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_strategy(st))


# -- optimisation steps ----------------------------------------------------------

def _positive_projector(A: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(_hermitize(A))
    Vp = V[:, w > 0]
    return Vp @ Vp.conj().T


def optimal_measurements_binary(states: np.ndarray, ineq: Inequality,
                                s: Optional[Scenario] = None) -> np.ndarray:
    """Best two-outcome measurements for fixed states.

    ``M_{0|y}`` projects onto the strictly positive eigenspace of
    ``sum_x (c_{x,y,0} - c_{x,y,1}) rho_x`` and ``M_{1|y} = 1 - M_{0|y}``.
    Valid when no measurement equivalences are imposed.
    """
    states = np.asarray(states, dtype=complex)
    nx, d = states.shape[0], states.shape[1]
    ny = s.ny if s is not None else len(ineq.coeffs) // (2 * nx)
    C = np.array([float(c) for c in ineq.coeffs]).reshape(nx, ny, 2)
    E = np.zeros((ny, 2, d, d), dtype=complex)
    for y in range(ny):
        A = np.einsum("x,xij->ij", C[:, y, 0] - C[:, y, 1], states)
        E[y, 0] = _positive_projector(A)
        E[y, 1] = np.eye(d) - E[y, 0]
    return E


def measurement_step(states: np.ndarray, C: np.ndarray, s: Scenario, tol: float = 1e-9):
    """Optimal effects for fixed states (SDP unless the binary closed form applies)."""
    d = states.shape[1]
    if s.nz == 2 and not s.meas_equivs:
        E = np.zeros((s.ny, 2, d, d), dtype=complex)
        for y in range(s.ny):
            A = np.einsum("x,xij->ij", C[:, y, 0] - C[:, y, 1], states)
            E[y, 0] = _positive_projector(A)
            E[y, 1] = np.eye(d) - E[y, 0]
        return E
    basis = hermitian_basis(d)
    obj = np.einsum("xyz,xij->yzij", C, states).reshape(-1, d, d)
    rows, rhs = _effect_constraints(s, d, basis)
    _, X = solve_hermitian(obj, rows, rhs, tol=tol)
    return X.reshape(s.ny, s.nz, d, d)


def state_step(effects: np.ndarray, C: np.ndarray, s: Scenario, tol: float = 1e-9):
    """Optimal states for fixed effects, equivalences imposed exactly."""
    d = effects.shape[-1]
    basis = hermitian_basis(d)
    obj = np.einsum("xyz,yzij->xij", C, effects)
    rows, rhs = _state_constraints(s, d, basis)
    _, X = solve_hermitian(obj, rows, rhs, tol=tol)
    return X


def random_states(s: Scenario, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random states obeying the preparation equivalences.

    Independent preparations get normalised Wishart matrices, dependent
    ones follow from the affine relations, and all are mixed toward
    ``1/d`` by the smallest common weight that makes every one PSD.
    """
    indep, dep = prep_relations(s)
    st = np.zeros((s.nx, d, d), dtype=complex)
    for x in indep:
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        W = G @ G.conj().T
        st[x] = W / np.trace(W).real
    for x, terms in dep.items():
        st[x] = sum(float(c) * st[j] for j, c in terms)
    st, _ = _mix_to_psd(_hermitize(st), np.eye(d) / d)
    return st


def random_effects(s: Scenario, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random POVMs ``M_z = S^{-1/2} W_z S^{-1/2}`` from Wishart matrices ``W_z``.

    Measurement equivalences are not imposed.
    """
    E = np.zeros((s.ny, s.nz, d, d), dtype=complex)
    for y in range(s.ny):
        G = rng.standard_normal((s.nz, d, d)) + 1j * rng.standard_normal((s.nz, d, d))
        W = G @ np.conj(np.swapaxes(G, -1, -2))
        w, V = np.linalg.eigh(W.sum(axis=0))
        S = (V / np.sqrt(w)) @ V.conj().T
        E[y] = S @ W @ S
    return _hermitize(E)


# -- see-saw -----------------------------------------------------------------------

@dataclass
class SeesawConfig:
    restarts: int = 50
    max_iter: int = 200
    delta: float = 1e-9
    seed: int = 0
    threads: int = 1
    sdp_tol: float = 1e-9

    def __post_init__(self):
        for name in ("restarts", "max_iter", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass
class RestartResult:
    index: int
    value: float
    strategy: QuantumStrategy
    history: List[float] = field(default_factory=list)


def seesaw_restart(s: Scenario, ineq: Inequality, d: int, rng: np.random.Generator,
                   cfg: SeesawConfig, index: int = 0) -> RestartResult:
    """One see-saw run from a random start; values are exact-validity values."""
    C = coefficient_array(ineq, s)
    states = random_states(s, d, rng)
    effects = None
    if index % 2 == 1 and not s.meas_equivs:
        # alternate restarts begin from random measurements instead
        effects = random_effects(s, d, rng)
    best_val, best = -np.inf, None
    history: List[float] = []
    for _ in range(cfg.max_iter):
        if effects is None:
            effects = measurement_step(states, C, s, cfg.sdp_tol)
        cand = repair(QuantumStrategy(d, states, effects), s)
        effects = None
        states = state_step(cand.effects, C, s, cfg.sdp_tol)
        cand = repair(QuantumStrategy(d, states, cand.effects), s)
        states = cand.states
        val = evaluate(cand, ineq)
        history.append(val)
        improved = val - best_val
        if val > best_val:
            best_val, best = val, cand
        if improved < cfg.delta:
            break
    return RestartResult(index, best_val, best, history)


def _restart_worker(args):
    s, ineq, d, cfg, index, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    try:
        return seesaw_restart(s, ineq, d, rng, cfg, index)
    except SdpFailure as exc:
        raise SdpFailure(f"restart {index}: {exc}") from exc


def seesaw_runs(s: Scenario, ineq: Inequality, d: int,
                cfg: Optional[SeesawConfig] = None) -> List[RestartResult]:
    """All restarts, each with its own RNG stream spawned from ``cfg.seed``."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    cfg = cfg or SeesawConfig()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    jobs = [(s, ineq, d, cfg, r, seeds[r]) for r in range(cfg.restarts)]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            return list(ex.map(_restart_worker, jobs))
    return [_restart_worker(j) for j in jobs]


def seesaw(s: Scenario, ineq: Inequality, d: int,
           cfg: Optional[SeesawConfig] = None) -> Tuple[float, QuantumStrategy]:
    """Best see-saw value over restarts (a lower bound on the quantum maximum).

    The winner is the highest value, ties broken by the lowest restart index,
    so the result does not depend on ``cfg.threads``.
    """
    runs = seesaw_runs(s, ineq, d, cfg)
    best = max(runs, key=lambda r: (r.value, -r.index))
    return best.value, best.strategy


# -- classical models ----------------------------------------------------------------

@dataclass
class OntologicalModel:
    """Finite ontic model: ``mu[l][x]`` epistemic weights, ``xi[l]`` responses.

    ``xi[l]`` is a flattened response vector indexed ``y * nz + z``.
    """

    mu: Tuple[Tuple[Fraction, ...], ...]
    xi: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self):
        self.mu = tuple(rvec(m) for m in self.mu)
        self.xi = tuple(rvec(r) for r in self.xi)

    @property
    def n_lambda(self):
        return len(self.mu)

    def check(self, s: Scenario) -> None:
        """Raise ``ValueError`` unless normalisation and noncontextuality hold exactly."""
        if len(self.xi) != len(self.mu):
            raise ValueError("mu and xi list different numbers of ontic states")
        for x in range(s.nx):
            col = [m[x] for m in self.mu]
            if any(v < 0 for v in col) or sum(col) != 1:
                raise ValueError(f"mu(.|{x}) is not a distribution")
        for lam, m in enumerate(self.mu):
            for g in s.prep_equivs:
                vals = {sum(a * b for a, b in zip(v, m)) for v in g}
                if len(vals) != 1:
                    raise ValueError(f"ontic state {lam} breaks a preparation equivalence")
        for lam, r in enumerate(self.xi):
            if any(v < 0 for v in r):
                raise ValueError(f"negative response at ontic state {lam}")
            for y in range(s.ny):
                if sum(r[y * s.nz:(y + 1) * s.nz]) != 1:
                    raise ValueError(f"responses at ontic state {lam} are not normalised")
            for g in s.meas_equivs:
                vals = {sum(a * b for a, b in zip(v, r)) for v in g}
                if len(vals) != 1:
                    raise ValueError(f"ontic state {lam} breaks a measurement equivalence")

    def behavior(self, s: Scenario) -> Tuple[Fraction, ...]:
        p = [Fraction(0)] * s.n_coords
        for m, r in zip(self.mu, self.xi):
            for x in range(s.nx):
                if m[x] == 0:
                    continue
                for y in range(s.ny):
                    for z in range(s.nz):
                        p[s.index(x, y, z)] += m[x] * r[y * s.nz + z]
        return tuple(p)


def _best_response(weights: Sequence[Fraction], vertices) -> Tuple[Fraction, tuple]:
    best = None
    for v in vertices:
        val = sum((a * b for a, b in zip(weights, v) if a), Fraction(0))
        if best is None or val > best[0]:
            best = (val, v)
    return best


def deterministic_ontic_bound(s: Scenario, ineq: Inequality,
                              n_lambda: Optional[int] = None) -> Fraction:
    """Maximum over models whose epistemic states are deterministic.

    Every assignment ``x -> lambda(x)`` of the ``n_lambda`` ontic states
    (default ``nx``) is tried; it is feasible when each ontic state meets
    every preparation equivalence. Responses are then optimised per ontic
    state over the measurement-polytope vertices.
    """
    n_lambda = s.nx if n_lambda is None else n_lambda
    if n_lambda < 1:
        raise ValueError("n_lambda must be at least 1")
    verts = meas_polytope(s).vertices
    c = ineq.coeffs
    best = None
    for assign in itertools.product(range(n_lambda), repeat=s.nx):
        # relabelling ontic states changes nothing: keep first occurrences 0, 1, 2, ...
        seen = list(dict.fromkeys(assign))
        if seen != list(range(len(seen))):
            continue
        ok = True
        for lam in seen:
            ind = [Fraction(int(a == lam)) for a in assign]
            for g in s.prep_equivs:
                if len({sum(a * b for a, b in zip(v, ind)) for v in g}) != 1:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        total = Fraction(0)
        for lam in seen:
            w = [Fraction(0)] * (s.ny * s.nz)
            for x, a in enumerate(assign):
                if a == lam:
                    for y in range(s.ny):
                        for z in range(s.nz):
                            w[y * s.nz + z] += c[s.index(x, y, z)]
            total += _best_response(w, verts)[0]
        if best is None or total > best:
            best = total
    if best is None:
        raise NoFeasibleModel("no deterministic assignment satisfies the equivalences")
    return best


def _random_fraction_weights(rng: np.random.Generator, k: int, scale: int = 12) -> List[Fraction]:
    raw = [int(v) + 1 for v in rng.integers(0, scale, size=k)]
    tot = sum(raw)
    return [Fraction(r, tot) for r in raw]


def sample_nc_behavior(s: Scenario, rng: np.random.Generator, n_mix: int = 3,
                       single: bool = False) -> Tuple[Tuple[Fraction, ...], OntologicalModel]:
    """Random noncontextual model and the behaviour it induces (exact).

    Ontic states are vertices ``q`` of the preparation polytope with weights
    ``w`` solving ``sum_l w_l q_l(x) = 1``; ``w`` is a random mixture of LP
    vertices of that system, so ``mu(l|x) = w_l q_l(x)`` is normalised and
    obeys every preparation equivalence. Each response function is a random
    mixture of measurement-polytope vertices. With ``single=True`` there is
    one ontic state (``q = 1``).
    """
    mverts = meas_polytope(s).vertices

    def response():
        k = int(rng.integers(1, min(n_mix, len(mverts)) + 1))
        pick = rng.choice(len(mverts), size=k, replace=False)
        wts = _random_fraction_weights(rng, k)
        r = [Fraction(0)] * len(mverts[0])
        for w, i in zip(wts, pick):
            r = [a + w * b for a, b in zip(r, mverts[int(i)])]
        return tuple(r)

    if single:
        model = OntologicalModel([[Fraction(1)] * s.nx], [response()])
        return model.behavior(s), model

    pverts = prep_polytope(s).vertices
    nv = len(pverts)
    # w >= 0 with sum_v w_v q_v(x) = 1 for all x
    A = [[Fraction(-1) if j == i else Fraction(0) for j in range(nv)] for i in range(nv)]
    E = [[pverts[v][x] for v in range(nv)] for x in range(s.nx)]
    h = HPolytope(A, [Fraction(0)] * nv, E, [Fraction(1)] * s.nx, nv)
    sols = []
    for _ in range(n_mix):
        c = [Fraction(int(v)) for v in rng.integers(-5, 6, size=nv)]
        res = solve_lp(c, h, "max")
        if res.status == "optimal":
            sols.append(res.x)
    if not sols:
        raise NoFeasibleModel("normalised epistemic weights do not exist")
    mix = _random_fraction_weights(rng, len(sols))
    w = [sum(m * sol[v] for m, sol in zip(mix, sols)) for v in range(nv)]
    mu, xi = [], []
    for v in range(nv):
        if w[v] > 0:
            mu.append([w[v] * q for q in pverts[v]])
            xi.append(response())
    model = OntologicalModel(mu, xi)
    return model.behavior(s), model
