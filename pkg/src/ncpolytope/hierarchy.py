"""Moment-matrix upper bounds on quantum values.

For every preparation ``x`` a real symmetric moment matrix
``G^x[v, w] = Re Tr(rho_x v^T w)`` is indexed by operator words ``v, w`` up
to a given length. Letters are the projectors ``P_{z|y}`` for
``z < nz - 1``; the last outcome is ``1 - sum_z P_{z|y}``. General POVMs
are covered through a Naimark dilation: the projectors act on a larger
space and the states live on a subspace with projector ``Pi``. Without
measurement equivalences ``Pi`` never enters and the relaxation coincides
with the projective one; with them, the equivalences only constrain the
compressions ``Pi (sum beta P) Pi`` unless ``projective=True``.

All linear relations (preparation equivalences, measurement equivalences,
value constraints) are eliminated exactly, and the remaining problem is
solved as a linear matrix inequality with :mod:`ncpolytope.sdp`.
Restricting real parts loses nothing: the real part of a complex moment
assignment satisfies the same real constraints with the same objective.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .pipeline import Inequality
from .quantum import _differences, random_states
from .scenario import Scenario
from .sdp import NumericalBreakdown, SDPProblem, SdpFailure, solve

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]

ENDPOINT_BACKOFF = 1e-7    # distance kept from the relaxation maximum in guessing SDPs
CONVERGED_GAP = 1e-5       # largest gap accepted from a solve that hit its iteration cap
ACCEPT_MERIT = 1e-4        # worst residual/gap returned as a bound from an unconverged solve


class Infeasible(SdpFailure):
    pass


class SpanNotConverged(RuntimeError):
    pass


class NonMonotoneCurve(RuntimeError):
    pass


def _chop(M, eps=1e-13):
    M = np.asarray(M)
    M[np.abs(M) < eps] = 0.0
    return M


# -- words -----------------------------------------------------------------------

class Alphabet:
    """Letters ``P_{z|y}`` (``z < nz - 1``) and optionally the subspace projector."""

    def __init__(self, s: Scenario, dilate: bool):
        self.s = s
        self.letters: List[Tuple[int, int]] = [(y, z) for y in range(s.ny) for z in range(s.nz - 1)]
        self.index = {lz: i for i, lz in enumerate(self.letters)}
        self.pi = len(self.letters) if dilate else None
        self.size = len(self.letters) + (1 if dilate else 0)
        self._setting = [y for y, _ in self.letters]

    def letter(self, y: int, z: int) -> int:
        return self.index[(y, z)]

    def reduce(self, word: Sequence[int]) -> Optional[Word]:
        """Normal form under idempotence and orthogonality, ``None`` for zero."""
        out: List[int] = []
        for a in word:
            if out:
                b = out[-1]
                if a == b:
                    continue
                if a != self.pi and b != self.pi and self._setting[a] == self._setting[b]:
                    return None
            out.append(a)
        return tuple(out)

    def moment_key(self, word: Sequence[int]) -> Optional[Word]:
        """Canonical moment word: reduced, ``Pi`` stripped at the ends, reversal-invariant."""
        w = self.reduce(word)
        if w is None:
            return None
        if self.pi is not None:
            lo, hi = 0, len(w)
            while lo < hi and w[lo] == self.pi:
                lo += 1
            while hi > lo and w[hi - 1] == self.pi:
                hi -= 1
            w = w[lo:hi]
        r = w[::-1]
        return min(w, r)

    def index_words(self, level: int) -> List[Word]:
        """Distinct nonzero words of length at most ``level``.

        Words ending in ``Pi`` act on the state like their prefix and are left out.
        """
        words = [()]
        seen = {()}
        frontier = [()]
        for _ in range(level):
            nxt = []
            for w in frontier:
                for a in range(self.size):
                    r = self.reduce(w + (a,))
                    if r is None or r in seen or len(r) != len(w) + 1:
                        continue
                    seen.add(r)
                    nxt.append(r)
            frontier = nxt
            words += nxt
        if self.pi is not None:
            words = [w for w in words if not w or w[-1] != self.pi]
        return words

    def expand_effect(self, y: int, z: int) -> Dict[Word, Fraction]:
        """``M_{z|y}`` as a combination of words (the last outcome via completeness)."""
        nz = self.s.nz
        if z < nz - 1:
            return {(self.letter(y, z),): Fraction(1)}
        out = {(): Fraction(1)}
        for zz in range(nz - 1):
            out[(self.letter(y, zz),)] = Fraction(-1)
        return out


# -- exact elimination -------------------------------------------------------------

class Eliminator:
    """Incremental sparse Gaussian elimination over rationals.

    Constraints ``sum c_v v = rhs``; each new pivot is the highest-priority
    variable of the reduced row and substituted into earlier expressions.
    """

    def __init__(self, priority):
        self.priority = priority
        self.sub: Dict[object, Tuple[Dict[object, Fraction], Fraction]] = {}
        self.users: Dict[object, set] = {}

    def reduce(self, row: Dict[object, Fraction], rhs: Fraction):
        row = dict(row)
        rhs = Fraction(rhs)
        for v in [v for v in row if v in self.sub]:
            c = row.pop(v)
            expr, const = self.sub[v]
            rhs -= c * const
            for u, a in expr.items():
                val = row.get(u, 0) + c * a
                if val:
                    row[u] = val
                else:
                    row.pop(u, None)
        return row, rhs

    def add(self, row: Dict[object, Fraction], rhs=0) -> bool:
        """Add a constraint; returns False when it was redundant."""
        row, rhs = self.reduce({k: Fraction(v) for k, v in row.items() if v}, rhs)
        if not row:
            if rhs != 0:
                raise Infeasible("inconsistent linear constraints")
            return False
        p = max(row, key=self.priority)
        cp = row.pop(p)
        expr = {v: -c / cp for v, c in row.items()}
        const = rhs / cp
        # substitute p in every expression that uses it
        for q in list(self.users.get(p, ())):
            e, k = self.sub[q]
            a = e.pop(p)
            k += a * const
            for v, c in expr.items():
                val = e.get(v, 0) + a * c
                if val:
                    e[v] = val
                    self.users.setdefault(v, set()).add(q)
                else:
                    e.pop(v, None)
                    self.users.get(v, set()).discard(q)
            self.sub[q] = (e, k)
        self.users.pop(p, None)
        self.sub[p] = (expr, const)
        for v in expr:
            self.users.setdefault(v, set()).add(p)
        return True

    def express(self, v) -> Tuple[Dict[object, Fraction], Fraction]:
        if v in self.sub:
            e, k = self.sub[v]
            return dict(e), k
        return {v: Fraction(1)}, Fraction(0)


# -- moment problem ------------------------------------------------------------------

@dataclass
class MomentResult:
    value: float
    status: str
    level: int
    projective: bool
    n_blocks: int
    block_size: int
    n_vars: int
    solution: object = None
    free: list = field(default_factory=list)
    point: Optional[np.ndarray] = None      # optimal free-variable values


class MomentProblem:
    """Level-``level`` relaxation of a scenario, ready for objectives and equalities.

    Parameters
    ----------
    s : scenario
    level : maximal index-word length
    projective : impose measurement equivalences on the projectors directly
        instead of on their compressions
    """

    def __init__(self, s: Scenario, level: int, projective: bool = False):
        if level < 1:
            raise ValueError("level must be at least 1")
        self.s = s
        self.level = level
        self.projective = projective
        dilate = bool(s.meas_equivs) and not projective
        self.alpha = Alphabet(s, dilate)
        self.words = self.alpha.index_words(level)
        n = len(self.words)
        # entry -> moment key
        self.entry_keys: List[List[Optional[Word]]] = [[None] * n for _ in range(n)]
        keys = set()
        for i, v in enumerate(self.words):
            for j in range(i, n):
                k = self.alpha.moment_key(v[::-1] + self.words[j])
                self.entry_keys[i][j] = self.entry_keys[j][i] = k
                if k:
                    keys.add(k)
        self.keys = sorted(keys, key=lambda w: (len(w), w))
        self.key_set = keys
        nx = s.nx
        self.elim = Eliminator(lambda v: (v[0], len(v[1]), v[1]))
        # preparation equivalences, entrywise
        for diff in _differences(s.prep_equivs, nx):
            for k in self.keys:
                self.elim.add({(x, k): c for x, c in enumerate(diff) if c})
        self._meas_equivalences()
        self._base = dict(self.elim.sub)
        self.face = self._face()

    # expressions over moment variables -----------------------------------------
    def moment(self, x: int, word: Sequence[int]) -> Optional[Tuple[Dict, Fraction]]:
        """``Re Tr(rho_x word)`` as ``(coeffs, const)``; ``None`` if not a problem variable."""
        k = self.alpha.moment_key(tuple(word))
        if k is None:
            return {}, Fraction(0)
        if k == ():
            return {}, Fraction(1)
        if k not in self.key_set:
            return None
        return {(x, k): Fraction(1)}, Fraction(0)

    def _combine(self, terms) -> Optional[Tuple[Dict, Fraction]]:
        row: Dict = {}
        const = Fraction(0)
        for c, x, word in terms:
            m = self.moment(x, word)
            if m is None:
                return None
            e, k = m
            const += c * k
            for v, a in e.items():
                row[v] = row.get(v, 0) + c * a
        return {v: a for v, a in row.items() if a}, const

    def probability(self, x: int, y: int, z: int):
        return self._combine([(c, x, w) for w, c in self.alpha.expand_effect(y, z).items()])

    def linear_form(self, ineq: Inequality):
        s = self.s
        terms = []
        for (z, x, y), c in zip(s.labels(), ineq.coeffs):
            if c:
                terms += [(c * a, x, w) for w, a in self.alpha.expand_effect(y, z).items()]
        return self._combine(terms)

    def _meas_equivalences(self):
        s = self.s
        if not s.meas_equivs:
            return
        pi = () if self.alpha.pi is None else (self.alpha.pi,)
        diffs = _differences(s.meas_equivs, s.ny * s.nz)
        for diff in diffs:
            D: Dict[Word, Fraction] = {}
            for e, c in enumerate(diff):
                if c:
                    y, z = divmod(e, s.nz)
                    for w, a in self.alpha.expand_effect(y, z).items():
                        D[w] = D.get(w, 0) + c * a
            D = {w: a for w, a in D.items() if a}
            for x in range(s.nx):
                for v in self.words:
                    for w in self.words:
                        terms = [(a, x, v[::-1] + pi + dw + pi + w) for dw, a in D.items()]
                        comb = self._combine(terms)
                        if comb is None:
                            continue
                        row, const = comb
                        self.elim.add(row, -const)

    def _face(self) -> Optional[np.ndarray]:
        """Orthonormal basis of the complement of the forced kernel, or ``None``.

        Operator identities ``D = 0`` (or ``Pi D Pi = 0``) make ``D w |psi>``
        vanish, so the combination of index words it expands to lies in the
        kernel of every moment matrix. Dropping those directions keeps the
        reduced problem strictly feasible.
        """
        s = self.s
        if not s.meas_equivs:
            return None
        pi = () if self.alpha.pi is None else (self.alpha.pi,)
        pos = {w: i for i, w in enumerate(self.words)}
        kernel = []
        for diff in _differences(s.meas_equivs, s.ny * s.nz):
            D: Dict[Word, Fraction] = {}
            for e, c in enumerate(diff):
                if c:
                    y, z = divmod(e, s.nz)
                    for w, a in self.alpha.expand_effect(y, z).items():
                        D[w] = D.get(w, 0) + c * a
            for w in self.words:
                vec = np.zeros(len(self.words))
                ok = True
                for dw, a in D.items():
                    if not a:
                        continue
                    r = self.alpha.reduce(pi + dw + pi + w)
                    if r is None:
                        continue
                    while pi and r and r[-1] == pi[0]:
                        r = r[:-1]
                    if r not in pos:
                        ok = False
                        break
                    vec[pos[r]] += float(a)
                if ok and np.any(vec):
                    kernel.append(vec)
        if not kernel:
            return None
        from scipy.linalg import null_space
        V = null_space(np.array(kernel), rcond=1e-10)
        return V if V.shape[1] < len(self.words) else None

    # assembly and solve -----------------------------------------------------------
    def reset(self):
        self.elim.sub = {k: (dict(e), c) for k, (e, c) in self._base.items()}
        self.elim.users = {}
        for q, (e, _) in self.elim.sub.items():
            for v in e:
                self.elim.users.setdefault(v, set()).add(q)

    def add_equality(self, row: Dict, rhs) -> None:
        self.elim.add(row, rhs)

    def _resolve(self, row: Dict, const: Fraction):
        out: Dict = {}
        k = Fraction(const)
        for v, c in row.items():
            e, kk = self.elim.express(v)
            k += c * kk
            for u, a in e.items():
                out[u] = out.get(u, 0) + c * a
        return {u: a for u, a in out.items() if a}, k

    def free_variables(self) -> List:
        out = set()
        for x in range(self.s.nx):
            for k in self.keys:
                e, _ = self.elim.express((x, k))
                out.update(e)
        return sorted(out, key=lambda v: (v[0], len(v[1]), v[1]))

    def assemble(self, objective: Tuple[Dict, Fraction], basis: Optional[Tuple] = None):
        """LMI data: returns ``(SDPProblem, free, c, c0, offset)``.

        ``basis = (t0, B)`` re-parametrises the free variables as ``t0 + B s``.
        """
        free = self.free_variables()
        fidx = {v: i for i, v in enumerate(free)}
        n = len(self.words)
        nf = len(free)
        F0, rows, cols, vals, blocks = [], [], [], [], []
        cache = {}
        for x in range(self.s.nx):
            f0 = np.zeros((n, n))
            r, cidx, dv = [], [], []
            for i in range(n):
                for j in range(i, n):
                    k = self.entry_keys[i][j]
                    if k is None:
                        continue
                    if k == ():
                        f0[i, j] = f0[j, i] = 1.0
                        continue
                    key = (x, k)
                    if key not in cache:
                        cache[key] = self.elim.express(key)
                    e, c0 = cache[key]
                    if c0:
                        f0[i, j] = f0[j, i] = float(c0)
                    for v, a in e.items():
                        r.append(fidx[v]); cidx.append(i * n + j); dv.append(float(a))
                        if i != j:
                            r.append(fidx[v]); cidx.append(j * n + i); dv.append(float(a))
            F0.append(f0)
            rows.append(r); cols.append(cidx); vals.append(dv)
        obj, c0 = self._resolve(*objective)
        c = np.zeros(nf)
        for v, a in obj.items():
            c[fidx[v]] = float(a)
        c0 = float(c0)
        A = [sp.csr_matrix((vals[b], (rows[b], cols[b])), shape=(nf, n * n)) for b in range(self.s.nx)]
        offset = None
        if basis is not None:
            t0, B = basis
            # F(t0 + B s) = F0 + sum_k t0_k F_k + sum_j s_j (sum_k B_kj F_k)
            for b in range(self.s.nx):
                F0[b] = F0[b] + (A[b].T @ t0).reshape(n, n)
                A[b] = sp.csr_matrix(B.T @ A[b])
            c0 = c0 + float(c @ t0)
            c = B.T @ c
            offset = (t0, B)
        if self.face is not None:
            V = self.face
            KV = np.kron(V, V)
            F0 = [V.T @ f @ V for f in F0]
            A = [sp.csr_matrix(_chop(a @ KV)) for a in A]
            n = V.shape[1]
        blocks = [n] * self.s.nx
        p = SDPProblem(blocks, [-f for f in F0], A, -c)
        return p, free, c, c0, offset

    def maximise(self, objective, basis=None, tol: float = 1e-8) -> MomentResult:
        p, free, c, c0, offset = self.assemble(objective, basis)
        try:
            sol = solve(p, tol=tol, max_iter=150)
        except NumericalBreakdown as exc:
            # breakdowns happen near the optimum of faces without interior;
            # the best iterate is judged like any unconverged solve below
            logger.debug("solver breakdown: %s", exc)
            sol = exc.solution
            if sol is None:
                raise
        if sol.status == "infeasible":
            raise Infeasible("moment relaxation is infeasible")
        if sol.status == "unbounded":
            raise SdpFailure("moment relaxation is unbounded")
        if sol.status != "optimal":
            merit = max(sol.primal_residual, sol.dual_residual, sol.gap)
            if merit > ACCEPT_MERIT:
                raise SdpFailure(f"moment SDP did not converge (residual/gap {merit:.1e})")
            if merit > 1e-6:
                logger.warning("moment SDP stopped early (residual/gap %.1e)", merit)
        value = c0 - sol.value
        point = sol.y
        if offset is not None:
            point = offset[0] + offset[1] @ sol.y
        return MomentResult(value, sol.status, self.level, self.projective, self.s.nx,
                            len(self.words), len(free), sol, free, point)

    # moment vectors of explicit strategies ------------------------------------------
    def strategy_moments(self, states: np.ndarray, effects: np.ndarray, free: List) -> np.ndarray:
        """Values of the free variables for a strategy with projective effects.

        Only valid without the dilation letter (``Pi``).
        """
        if self.alpha.pi is not None:
            raise ValueError("explicit moments need the undilated alphabet")
        ops = [effects[y, z] for y, z in self.alpha.letters]
        d = states.shape[1]
        prod_cache: Dict[Word, np.ndarray] = {(): np.eye(d)}

        def prod(w):
            if w not in prod_cache:
                prod_cache[w] = prod(w[:-1]) @ ops[w[-1]]
            return prod_cache[w]

        return np.array([np.trace(states[x] @ prod(k)).real for x, k in free])


# -- public bounds ---------------------------------------------------------------------

def upper_bound(s: Scenario, ineq: Inequality, level: int = 1, projective: bool = False,
                tol: float = 1e-8) -> float:
    """Dimension-free upper bound on the quantum value of ``ineq``."""
    return bound_details(s, ineq, level, projective, tol).value


def bound_details(s: Scenario, ineq: Inequality, level: int = 1, projective: bool = False,
                  tol: float = 1e-8) -> MomentResult:
    mp = MomentProblem(s, level, projective)
    form = mp.linear_form(ineq)
    if form is None:
        raise ValueError("inequality involves words outside the relaxation")
    return mp.maximise(form, tol=tol)


def projective_bound(s: Scenario, ineq: Inequality, level: int = 1, tol: float = 1e-8) -> float:
    """Upper bound when every measurement is projective."""
    return upper_bound(s, ineq, level, projective=True, tol=tol)


def _rank_patterns(s: Scenario, d: int) -> List[Tuple[Tuple[int, ...], ...]]:
    """Every assignment of projector ranks (summing to ``d``) to each measurement."""
    one = [c for c in itertools.product(range(d + 1), repeat=s.nz) if sum(c) == d]
    return list(itertools.product(one, repeat=s.ny))


def _random_projective_effects(s: Scenario, d: int, rng: np.random.Generator,
                               ranks=None) -> np.ndarray:
    E = np.zeros((s.ny, s.nz, d, d), dtype=complex)
    for y in range(s.ny):
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        U, _ = np.linalg.qr(G)
        if ranks is None:
            labels = rng.integers(0, s.nz, size=d)
        else:
            labels = np.repeat(np.arange(s.nz), ranks[y])
        for z in range(s.nz):
            cols = U[:, labels == z]
            E[y, z] = cols @ cols.conj().T
    return E


def moment_span(mp: MomentProblem, free: List, d: int, rng: np.random.Generator,
                n_samples: int = 5000, patience: int = 25, tol: float = 1e-9):
    """Affine span ``(t0, B)`` of moment vectors of random ``d``-dimensional strategies.

    Strategies obey the preparation equivalences and use projective
    measurements; the projector ranks cycle through every pattern, since each
    pattern spans its own subspace. Sampling stops once the rank is unchanged
    for ``patience`` consecutive samples and at least one full cycle.
    """
    patterns = _rank_patterns(mp.s, d)
    need = max(patience, len(patterns))
    t0 = None
    Q = np.zeros((len(free), 0))
    stable = 0
    for it in range(n_samples):
        st = random_states(mp.s, d, rng)
        ef = _random_projective_effects(mp.s, d, rng, patterns[it % len(patterns)])
        v = mp.strategy_moments(st, ef, free)
        if t0 is None:
            t0 = v
            continue
        r = v - t0
        r = r - Q @ (Q.T @ r)
        r = r - Q @ (Q.T @ r)
        nr = np.linalg.norm(r)
        if nr > tol * max(1.0, np.linalg.norm(v)):
            Q = np.hstack([Q, (r / nr)[:, None]])
            stable = 0
        else:
            stable += 1
            if stable >= need:
                return t0, Q
    raise SpanNotConverged(f"moment span still growing after {n_samples} samples "
                           f"(rank {Q.shape[1]})")


def dim_restricted_bound(s: Scenario, ineq: Inequality, d: int, level: int = 3,
                         n_samples: int = 5000, seed: int = 0, patience: int = 25,
                         tol: float = 1e-8) -> float:
    """Upper bound on the value over ``d``-dimensional strategies.

    The level-``level`` projective relaxation is restricted to the affine
    span of moment vectors sampled from ``d``-dimensional strategies. This
    covers general POVMs only when projective measurements are optimal in
    dimension ``d`` (binary outcomes without measurement equivalences).
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if s.meas_equivs:
        raise NotImplementedError("dimension restriction needs a scenario without "
                                  "measurement equivalences")
    mp = MomentProblem(s, level, projective=True)
    form = mp.linear_form(ineq)
    free = mp.free_variables()
    rng = np.random.default_rng(seed)
    t0, B = moment_span(mp, free, d, rng, n_samples, patience)
    return mp.maximise(form, basis=(t0, B), tol=tol).value


def guessing_probability(s: Scenario, ineq: Inequality, i_value: float, x_star: int = 0,
                         y_star: int = 0, level: int = 1, projective: bool = False,
                         tol: float = 1e-8, problem: Optional[MomentProblem] = None,
                         q_max: Optional[float] = None) -> float:
    """Largest ``p(0|x*, y*)`` compatible with the inequality taking ``i_value``."""
    mp = problem or MomentProblem(s, level, projective)
    form = mp.linear_form(ineq)
    if q_max is None:
        mp.reset()
        q_max = mp.maximise(form, tol=tol).value
    if i_value > q_max + 1e-7:
        raise Infeasible(f"value {i_value} exceeds the relaxation maximum {q_max:.10g}")
    mp.reset()
    row, const = form
    # At the maximum the equality leaves a face without interior and the solver
    # stalls; p_guess is non-increasing in i, so backing off keeps a valid bound.
    i_eff = min(float(i_value), q_max - ENDPOINT_BACKOFF)
    target = Fraction(i_eff).limit_denominator(10 ** 12)
    mp.add_equality(row, target - const)
    obj = mp.probability(x_star, y_star, 0)
    res = mp.maximise(obj, tol=tol)
    mp.reset()
    sol = res.solution
    if res.status != "optimal" and sol.gap > CONVERGED_GAP:
        raise SdpFailure(f"guessing SDP did not converge at i = {i_value} "
                         f"(status {res.status}, gap {sol.gap:.1e})")
    return min(1.0, res.value)


def min_entropy(p_guess: float) -> float:
    return max(0.0, -math.log2(p_guess)) if p_guess > 0 else math.inf


def entropy_curve(s: Scenario, ineq: Inequality, grid: Sequence[float], x_star: int = 0,
                  y_star: int = 0, level: int = 1, projective: bool = False,
                  tol: float = 1e-8, mono_tol: float = 1e-6) -> List[Tuple[float, float]]:
    """``(i, -log2 p_guess(i))`` over ``grid``; checks that ``p_guess`` never increases."""
    mp = MomentProblem(s, level, projective)
    q_max = mp.maximise(mp.linear_form(ineq), tol=tol).value
    pts = []
    for i in sorted(grid):
        p = guessing_probability(s, ineq, i, x_star, y_star, level, projective, tol, mp, q_max)
        pts.append((float(i), p))
    for (i0, p0), (i1, p1) in zip(pts, pts[1:]):
        if p1 > p0 + mono_tol:
            raise NonMonotoneCurve(f"guessing probability rises from {p0:.8f} at {i0} "
                                   f"to {p1:.8f} at {i1}")
    return [(i, min_entropy(p)) for i, p in pts]
