"""Primal-dual interior-point solver for small semidefinite programs.

Problems are held in the standard primal form ::

    maximise   sum_b <C_b, X_b>
    subject to sum_b <A_ib, X_b> = b_i      (i = 1..m)
               X_b PSD (dense blocks) or X_b >= 0 (diagonal blocks)

with dual ::

    minimise   b.y
    subject to Z_b = sum_i y_i A_ib - C_b  PSD / >= 0.

Search directions use the HKM scaling with a Mehrotra predictor-corrector
and an infeasible starting point. Constraint matrices are stored sparse,
one ``m x n_b^2`` matrix per block. Complex Hermitian data go through the
real symmetric embedding ``H -> [[Re H, -Im H], [Im H, Re H]]``; see
:func:`embed_hermitian`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class SdpFailure(RuntimeError):
    pass


STALL_ITERS = 30    # iterations without a better iterate before giving up


class NumericalBreakdown(SdpFailure):
    """Raised when the Newton system can no longer be solved.

    ``solution`` holds the last iterate and ``diagnostics`` its residuals.
    """

    def __init__(self, msg, solution=None, diagnostics=None):
        super().__init__(msg)
        self.solution = solution
        self.diagnostics = diagnostics or {}


# -- problem ---------------------------------------------------------------------

@dataclass
class SDPProblem:
    """Block SDP in primal form.

    Parameters
    ----------
    blocks : block sizes; a negative size ``-k`` is a diagonal (LP) block of length k
    C : objective per block, dense ``n x n`` array or length-k vector
    A : per block a sparse ``m x n^2`` (row-major vec) or ``m x k`` matrix
    b : right-hand sides, length m
    """

    blocks: List[int]
    C: list
    A: list
    b: np.ndarray
    free: int = 0     # unused by the solver; set by builders that split free variables

    @property
    def m(self):
        return len(self.b)

    def check(self):
        if not (len(self.blocks) == len(self.C) == len(self.A)):
            raise ValueError("blocks, C and A lengths differ")
        for n, C, A in zip(self.blocks, self.C, self.A):
            k = abs(n)
            want = k * k if n > 0 else k
            if A.shape != (self.m, want):
                raise ValueError(f"constraint block has shape {A.shape}, expected {(self.m, want)}")
            if n > 0:
                if C.shape != (k, k) or not np.allclose(C, C.T, atol=1e-12):
                    raise ValueError("objective block must be symmetric")
            elif C.shape != (k,):
                raise ValueError("diagonal objective block has wrong length")


class ProblemBuilder:
    """Accumulates a primal-form problem constraint by constraint.

    Entries are added with :meth:`add` as ``(row, block, i, j, value)`` for
    the symmetric coefficient ``A_row[i, j] = A_row[j, i] = value``.
    """

    def __init__(self, blocks: Sequence[int]):
        self.blocks = list(blocks)
        self.C = [np.zeros((n, n)) if n > 0 else np.zeros(-n) for n in self.blocks]
        self._rows = [[] for _ in self.blocks]
        self._cols = [[] for _ in self.blocks]
        self._vals = [[] for _ in self.blocks]
        self.b: List[float] = []

    def new_row(self, rhs: float) -> int:
        self.b.append(float(rhs))
        return len(self.b) - 1

    def add(self, row, blk, i, j, val):
        n = self.blocks[blk]
        if n < 0:
            if i != j:
                raise ValueError("off-diagonal entry in a diagonal block")
            self._rows[blk].append(row)
            self._cols[blk].append(i)
            self._vals[blk].append(val)
            return
        self._rows[blk].append(row)
        self._cols[blk].append(i * n + j)
        self._vals[blk].append(val)
        if i != j:
            self._rows[blk].append(row)
            self._cols[blk].append(j * n + i)
            self._vals[blk].append(val)

    def add_matrix(self, row, blk, M):
        """Add a dense symmetric coefficient matrix (upper triangle is read)."""
        M = np.asarray(M, dtype=float)
        idx = np.argwhere(np.triu(np.abs(M) > 0))
        for i, j in idx:
            self.add(row, blk, int(i), int(j), M[i, j])

    def set_objective(self, blk, M):
        self.C[blk] = np.array(M, dtype=float)

    def build(self) -> SDPProblem:
        m = len(self.b)
        A = []
        for k, n in enumerate(self.blocks):
            width = n * n if n > 0 else -n
            A.append(sp.csr_matrix((self._vals[k], (self._rows[k], self._cols[k])), shape=(m, width)))
        p = SDPProblem(self.blocks, self.C, A, np.array(self.b, dtype=float))
        p.check()
        return p


@dataclass
class SDPSolution:
    status: str                 # optimal | infeasible | unbounded | max-iters
    primal: float
    dual: float
    X: list = field(default_factory=list)
    y: Optional[np.ndarray] = None
    Z: list = field(default_factory=list)
    iterations: int = 0
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    gap: float = np.nan

    @property
    def value(self):
        return 0.5 * (self.primal + self.dual)


# -- complex embedding ---------------------------------------------------------

def embed_hermitian(H: np.ndarray) -> np.ndarray:
    """Real symmetric ``2d x 2d`` image of a Hermitian matrix.

    ``<embed(H), embed(X)> = 2 Re Tr(H X)``.
    """
    H = np.asarray(H)
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])


def extract_hermitian(Xr: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_hermitian` (averaging the redundant copies)."""
    d = Xr.shape[0] // 2
    re = 0.5 * (Xr[:d, :d] + Xr[d:, d:])
    im = 0.5 * (Xr[d:, :d] - Xr[:d, d:])
    return re + 1j * im


# -- solver ------------------------------------------------------------------------

def _sym(M):
    return 0.5 * (M + M.T)


class _Ops:
    def __init__(self, p: SDPProblem):
        self.p = p
        self.dense = [n > 0 for n in p.blocks]
        self.sizes = [abs(n) for n in p.blocks]
        self.At = [A.T.tocsr() for A in p.A]

    def Aop(self, X):
        out = np.zeros(self.p.m)
        for A, x, d in zip(self.p.A, X, self.dense):
            out += A @ (x.ravel() if d else x)
        return out

    def ATop(self, y):
        out = []
        for At, n, d in zip(self.At, self.sizes, self.dense):
            v = At @ y
            out.append(_sym(v.reshape(n, n)) if d else v)
        return out

    def schur(self, X, Zinv):
        m = self.p.m
        M = np.zeros((m, m))
        for A, At, x, zi, n, d in zip(self.p.A, self.At, X, Zinv, self.sizes, self.dense):
            if A.nnz == 0:
                continue
            if not d:
                M += (A.multiply(x * zi) @ At).toarray()
                continue
            if n <= 48:
                # Tr(A_i X A_j Z^-1) = vec(A_i)^T (X kron Z^-1) vec(A_j)
                M += np.asarray((A @ np.kron(x, zi)) @ At)
            else:
                # one product per constraint touching this block
                Ad = A.tocsr()
                T = np.zeros((m, n * n))
                for i in range(m):
                    lo, hi = Ad.indptr[i], Ad.indptr[i + 1]
                    if lo == hi:
                        continue
                    cols = Ad.indices[lo:hi]
                    Ai = np.zeros((n, n))
                    Ai.flat[cols] = Ad.data[lo:hi]
                    T[i] = (x @ Ai @ zi).ravel()
                M += np.asarray(A @ T.T).T
        return _sym(M)


def _inner(P, Q, dense):
    return sum(float(np.vdot(a, b)) for a, b, d in zip(P, Q, dense))


def _max_step(X, dX, dense):
    alpha = np.inf
    for x, dx, d in zip(X, dX, dense):
        if d:
            L = np.linalg.cholesky(x)
            Li = sla.solve_triangular(L, np.eye(len(x)), lower=True)
            ev = np.linalg.eigvalsh(_sym(Li @ dx @ Li.T))
            lam = ev[0]
        else:
            r = dx / x
            lam = r.min() if len(r) else 0.0
        if lam < 0:
            alpha = min(alpha, -1.0 / lam)
    return alpha


def _inv(x, d):
    if not d:
        return 1.0 / x
    L = np.linalg.cholesky(x)
    Li = sla.solve_triangular(L, np.eye(len(x)), lower=True)
    return Li.T @ Li


def solve(p: SDPProblem, tol: float = 1e-8, max_iter: int = 100, verbose: bool = False
          ) -> SDPSolution:
    """Solve ``p`` to relative gap and residuals below ``tol``."""
    p.check()
    ops = _Ops(p)
    dense = ops.dense
    m = p.m
    b = p.b
    nrm_b = 1.0 + np.linalg.norm(b)
    nrm_C = 1.0 + np.sqrt(sum(float(np.vdot(c, c)) for c in p.C))
    ntot = sum(ops.sizes)

    # starting point scaled to the data, in the spirit of common IPM codes
    Anorms = np.zeros(m)
    for A in p.A:
        Anorms += np.asarray(A.multiply(A).sum(axis=1)).ravel()
    Anorms = np.sqrt(Anorms)
    xi = max(10.0, np.sqrt(ntot), float(np.max((1 + np.abs(b)) / (1 + Anorms))) * np.sqrt(ntot)
             if m else 10.0)
    eta = max(10.0, np.sqrt(ntot), float(Anorms.max()) if m else 0.0, nrm_C)
    X = [xi * np.eye(n) if d else xi * np.ones(n) for n, d in zip(ops.sizes, dense)]
    Z = [eta * np.eye(n) if d else eta * np.ones(n) for n, d in zip(ops.sizes, dense)]
    y = np.zeros(m)

    def residuals(X, y, Z):
        rp = b - ops.Aop(X)
        aty = ops.ATop(y)
        rd = [a - z - c for a, z, c in zip(aty, Z, p.C)]
        return rp, rd

    best, best_it = None, 0
    status = "max-iters"
    it = 0
    for it in range(1, max_iter + 1):
        rp, rd = residuals(X, y, Z)
        pobj = _inner(p.C, X, dense)
        dobj = float(b @ y)
        mu = _inner(X, Z, dense) / ntot
        pres = np.linalg.norm(rp) / nrm_b
        dres = np.sqrt(sum(float(np.vdot(r, r)) for r in rd)) / nrm_C
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        cur = (X, y, Z, pobj, dobj, pres, dres, gap)
        # degenerate problems can drift after their best iterate; keep it
        if best is None or max(pres, dres, gap) <= max(best[5:]):
            best, best_it = cur, it
        if verbose:
            logger.info("it %2d  p %.9g  d %.9g  gap %.2e  pres %.2e  dres %.2e",
                        it, pobj, dobj, gap, pres, dres)
        if pres < tol and dres < tol and gap < tol:
            status, best = "optimal", cur
            break
        if it - best_it >= STALL_ITERS:
            break
        # crude infeasibility tests on divergent iterates
        ny = np.linalg.norm(y)
        if ny > 1e10 and dobj < 0 and dres * nrm_C < 1e-6 * ny:
            status, best = "infeasible", cur
            break
        nX = max(np.abs(x).max() for x in X)
        if nX > 1e10 and pobj > 0 and pres * nrm_b < 1e-6 * nX:
            status, best = "unbounded", cur
            break

        Zinv = [_inv(z, d) for z, d in zip(Z, dense)]
        M = ops.schur(X, Zinv)
        M += 1e-14 * np.trace(M) / max(m, 1) * np.eye(m)
        try:
            fac = sla.cho_factor(M, lower=True)
            msolve = lambda r: sla.cho_solve(fac, r)  # noqa: E731
        except (np.linalg.LinAlgError, sla.LinAlgError):
            # close to the optimum M can lose definiteness to rounding; LU still
            # yields a usable direction and the step control guards the cone
            with np.errstate(all="ignore"):
                lu = sla.lu_factor(M, check_finite=False)
            msolve = lambda r: sla.lu_solve(lu, r)  # noqa: E731
        if not np.all(np.isfinite(msolve(np.ones(m)))):
            raise NumericalBreakdown(f"Schur complement factorisation failed at iteration {it}",
                                     _pack("max-iters", best, it, p),
                                     {"pres": pres, "dres": dres, "gap": gap, "mu": mu})

        def full_direction(sigma, corr=None):
            # dZ = A^T dy + rd and dX = G - X dZ Z^-1 with
            # G = sigma mu Z^-1 - X (- dXa dZa Z^-1 for the corrector);
            # A(dX) = rp then gives M dy = A(G - X rd Z^-1) - rp.
            G = []
            for k, (x, zi, d) in enumerate(zip(X, Zinv, dense)):
                g = sigma * mu * zi - x
                if corr is not None:
                    dxa, dza = corr[0][k], corr[1][k]
                    g = g - (dxa @ dza @ zi if d else dxa * dza * zi)
                G.append(_sym(g) if d else g)
            H = [g - (_sym(x @ r @ zi) if d else x * r * zi)
                 for g, x, r, zi, d in zip(G, X, rd, Zinv, dense)]
            dy = msolve(ops.Aop(H) - rp)
            dZ = [a + r for a, r in zip(ops.ATop(dy), rd)]
            dX = [_sym(g - x @ dz @ zi) if d else g - x * dz * zi
                  for g, x, dz, zi, d in zip(G, X, dZ, Zinv, dense)]
            return dX, dy, dZ

        dXa, dya, dZa = full_direction(0.0)
        ap = min(1.0, _max_step(X, dXa, dense))
        ad = min(1.0, _max_step(Z, dZa, dense))
        mu_aff = _inner([x + ap * dx for x, dx in zip(X, dXa)],
                        [z + ad * dz for z, dz in zip(Z, dZa)], dense) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        dX, dy, dZ = full_direction(sigma, (dXa, dZa))
        ap = min(1.0, 0.95 * _max_step(X, dX, dense))
        ad = min(1.0, 0.95 * _max_step(Z, dZ, dense))
        Xn = _interior_update(X, dX, ap, dense)
        Zn = _interior_update(Z, dZ, ad, dense)
        if Xn is None or Zn is None:
            raise NumericalBreakdown(f"iterate left the cone at iteration {it}",
                                     _pack("max-iters", best, it, p),
                                     {"pres": pres, "dres": dres, "gap": gap, "mu": mu})
        X, (Z, ad) = Xn[0], Zn
        y = y + ad * dy
    return _pack(status, best, it, p)


def _positive(x, d):
    if not d:
        return bool(np.all(x > 0))
    try:
        np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return False
    return True


def _interior_update(X, dX, alpha, dense, tries=40):
    """``X + alpha dX`` with ``alpha`` halved until every block stays positive definite."""
    for _ in range(tries):
        new = [_sym(x + alpha * dx) if d else x + alpha * dx for x, dx, d in zip(X, dX, dense)]
        if all(_positive(x, d) for x, d in zip(new, dense)):
            return new, alpha
        alpha *= 0.5
    return None


def _pack(status, best, it, p):
    X, y, Z, pobj, dobj, pres, dres, gap = best
    return SDPSolution(status, pobj, dobj, X, y, Z, it, pres, dres, gap)


def dump(p: SDPProblem, path) -> None:
    """Write ``block row col value`` lines (1-based, upper triangle).

    Row 0 holds the objective; rows 1..m the constraints, preceded by a
    header with ``m``, the block sizes and ``b``.
    """
    with open(path, "w") as fh:
        fh.write(f"{p.m}\n{' '.join(map(str, p.blocks))}\n")
        fh.write(" ".join(repr(float(v)) for v in p.b) + "\n")
        for k, (n, C) in enumerate(zip(p.blocks, p.C)):
            if n > 0:
                for i, j in zip(*np.nonzero(np.triu(C))):
                    fh.write(f"0 {k + 1} {i + 1} {j + 1} {C[i, j]!r}\n")
            else:
                for i in np.nonzero(C)[0]:
                    fh.write(f"0 {k + 1} {i + 1} {i + 1} {C[i]!r}\n")
        for k, (n, A) in enumerate(zip(p.blocks, p.A)):
            coo = A.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                if n > 0:
                    i, j = divmod(int(c), n)
                    if i > j:
                        continue
                else:
                    i = j = int(c)
                fh.write(f"{r + 1} {k + 1} {i + 1} {j + 1} {v!r}\n")


# -- Hermitian-variable problems --------------------------------------------------

def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis of ``d x d`` Hermitian matrices, shape ``(d*d, d, d)``.

    Orthonormal for ``<A, B> = Re Tr(A B)``; the first ``d`` elements are the
    diagonal units, so ``coords(H)[:d]`` is the diagonal of ``H``.
    """
    B = np.zeros((d * d, d, d), dtype=complex)
    k = 0
    for i in range(d):
        B[k, i, i] = 1.0
        k += 1
    r = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            B[k, i, j] = B[k, j, i] = r
            k += 1
            B[k, i, j], B[k, j, i] = -1j * r, 1j * r
            k += 1
    return B


def hermitian_coords(H: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Coordinates ``Re Tr(B_k H)``; works on stacks of matrices."""
    return np.einsum("kij,...ji->...k", basis, H).real


def from_coords(v: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.einsum("...k,kij->...ij", v, basis)


def independent_rows(R: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal linearly independent subset of the rows of ``R``."""
    if R.shape[0] == 0:
        return np.arange(0)
    _, Rq, piv = sla.qr(R.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rq))
    if diag.size == 0 or diag[0] == 0:
        return np.arange(0)
    rank = int(np.sum(diag > tol * diag[0]))
    return np.sort(piv[:rank])


def solve_hermitian(objective: np.ndarray, rows: np.ndarray, rhs: np.ndarray,
                    tol: float = 1e-8, max_iter: int = 100, accept: float = 1e-6):
    """Maximise ``sum_b Re Tr(C_b X_b)`` over PSD Hermitian blocks.

    Parameters
    ----------
    objective : array ``(nb, d, d)`` of Hermitian objective matrices
    rows, rhs : linear constraints ``rows @ coords(X) = rhs`` where
        ``coords`` stacks :func:`hermitian_coords` of the blocks in order
        (``rows`` has ``nb * d * d`` columns). Redundant rows are dropped.
    accept : residual level at which the last iterate is still returned when
        the Newton system breaks down

    Returns
    -------
    (SDPSolution, X) with ``X`` the ``(nb, d, d)`` Hermitian optimiser.
    """
    objective = np.asarray(objective)
    nb, d, _ = objective.shape
    basis = hermitian_basis(d)
    keep = independent_rows(np.asarray(rows, dtype=float))
    rows = np.asarray(rows, dtype=float)[keep]
    rhs = np.asarray(rhs, dtype=float)[keep]
    m = len(rhs)
    # vec(embed(B_k)) / 2 for every basis element: <embed(H)/2, Xr> = Re Tr(H X)
    E = np.stack([embed_hermitian(Bk).ravel() for Bk in basis]) / 2.0
    C, A = [], []
    dd = d * d
    for b in range(nb):
        C.append(embed_hermitian(objective[b]) / 2.0)
        blk = rows[:, b * dd:(b + 1) * dd] @ E
        blk[np.abs(blk) < 1e-15] = 0.0
        A.append(sp.csr_matrix(blk.reshape(m, 4 * dd)))
    p = SDPProblem([2 * d] * nb, C, A, rhs)
    try:
        sol = solve(p, tol=tol, max_iter=max_iter)
    except NumericalBreakdown as exc:
        # breakdowns happen close to the optimum; accept a nearly feasible iterate
        sol = exc.solution
        if sol is None or max(sol.primal_residual, sol.dual_residual, sol.gap) > accept:
            raise
        logger.debug("accepting iterate after breakdown: %s", exc)
    X = np.stack([extract_hermitian(x) for x in sol.X])
    return sol, X
