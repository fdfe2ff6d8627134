"""Double description method over the integers.

The engine computes the extreme rays of a pointed polyhedral cone
``{x : H x >= 0}``. Vertex enumeration and facet enumeration are both
reduced to it (see :mod:`ncpolytope.exactgeom.polytope`).

Rays are kept as primitive integer vectors, so no rounding can occur and
entries never overflow. Adjacency of two rays is decided combinatorially:
their common zero set must have enough constraints and must not be
contained in the zero set of any third ray. A popcount prefilter over the
pos/neg incidence matrices is vectorised with numpy; the exact containment
test uses per-constraint ray bitsets.
"""
from __future__ import annotations

import logging
from fractions import Fraction
from math import gcd
from typing import List, Sequence

import numpy as np

from .linalg import rref
from .rational import primitive

logger = logging.getLogger(__name__)


class DDError(ValueError):
    pass


def _dot(h: Sequence[int], r: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(h, r))


def _bits_to_array(masks: Sequence[int], width: int) -> np.ndarray:
    nbytes = (width + 7) // 8
    buf = b"".join(m.to_bytes(nbytes, "little") for m in masks)
    arr = np.frombuffer(buf, dtype=np.uint8).reshape(len(masks), nbytes)
    return np.unpackbits(arr, axis=1, bitorder="little")[:, :width]


def _initial_basis(rows: List[List[int]], n: int):
    """Greedily pick ``n`` independent rows (in the given order)."""
    chosen: List[int] = []
    echelon: List[List[Fraction]] = []
    pivcols: List[int] = []
    for i, row in enumerate(rows):
        v = [Fraction(x) for x in row]
        for e, pc in zip(echelon, pivcols):
            if v[pc] != 0:
                f = v[pc]
                v = [a - f * b for a, b in zip(v, e)]
        pc = next((j for j, x in enumerate(v) if x != 0), None)
        if pc is None:
            continue
        inv = 1 / v[pc]
        v = [x * inv for x in v]
        for k, e in enumerate(echelon):
            if e[pc] != 0:
                f = e[pc]
                echelon[k] = [a - f * b for a, b in zip(e, v)]
        echelon.append(v)
        pivcols.append(pc)
        chosen.append(i)
        if len(chosen) == n:
            break
    return chosen


def _inverse_columns(B: List[List[int]]) -> List[List[int]]:
    """Columns of ``B^{-1}`` scaled to primitive integer vectors."""
    n = len(B)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(B)]
    R, piv = rref(aug, list(range(n)))
    if len(piv) < n or piv != list(range(n)):
        raise DDError("singular initial basis")
    cols = []
    for j in range(n):
        col = [R[i][n + j] for i in range(n)]
        den = 1
        for v in col:
            den = den * v.denominator // gcd(den, v.denominator)
        cols.append(primitive([int(v * den) for v in col]))
    return cols


def extreme_rays(H: Sequence[Sequence[int]], order: str = "lexmin") -> List[List[int]]:
    """Extreme rays of the pointed cone ``{x : H x >= 0}``.

    Parameters
    ----------
    H : integer matrix, one constraint per row. Must have full column rank.
    order : constraint insertion order, ``"lexmin"`` (rows sorted
        lexicographically) or ``"given"``.

    Returns
    -------
    list of primitive integer rays in lexicographic order.
    """
    rows = []
    seen = set()
    for h in H:
        p = tuple(primitive([int(x) for x in h]))
        if any(p) and p not in seen:
            seen.add(p)
            rows.append(list(p))
    if not rows:
        raise DDError("cone has no constraints (not pointed)")
    n = len(rows[0])
    if order == "lexmin":
        rows.sort()
    elif order != "given":
        raise ValueError(f"unknown insertion order {order!r}")

    basis = _initial_basis(rows, n)
    if len(basis) < n:
        raise DDError("constraint matrix is rank deficient: cone is not pointed")

    m = len(rows)
    B = [rows[i] for i in basis]
    rays = _inverse_columns(B)
    basis_mask = 0
    for i in basis:
        basis_mask |= 1 << i
    zsets = [basis_mask & ~(1 << basis[j]) for j in range(n)]
    processed = list(basis)

    remaining = [i for i in range(m) if i not in set(basis)]
    for step, ci in enumerate(remaining):
        h = rows[ci]
        vals = [_dot(h, r) for r in rays]
        pos = [k for k, s in enumerate(vals) if s > 0]
        neg = [k for k, s in enumerate(vals) if s < 0]
        zer = [k for k, s in enumerate(vals) if s == 0]
        bit = 1 << ci
        if not neg:
            for k in zer:
                zsets[k] |= bit
            processed.append(ci)
            continue

        new_rays: List[List[int]] = []
        new_z: List[int] = []
        if pos:
            new_rays, new_z = _combine(rays, zsets, vals, pos, neg, processed, n, m)

        keep = pos + zer
        rays = [rays[k] for k in keep] + new_rays
        zsets = [zsets[k] for k in pos] + [zsets[k] | bit for k in zer] + [z | bit for z in new_z]
        processed.append(ci)
        logger.debug("dd step %d/%d: %d rays", step + 1, len(remaining), len(rays))

    return sorted(rays)


def _combine(rays, zsets, vals, pos, neg, processed, n, m):
    need = n - 2
    # popcount prefilter on the common zero sets
    zp = _bits_to_array([zsets[k] for k in pos], m).astype(np.float32)
    zn = _bits_to_array([zsets[k] for k in neg], m).astype(np.float32)
    counts = zp @ zn.T
    cand = np.argwhere(counts >= need - 0.5)
    if cand.size == 0:
        return [], []

    # per-constraint bitsets over current ray indices
    ray_bits = {}
    for c in processed:
        ray_bits[c] = 0
    for idx, z in enumerate(zsets):
        zz = z
        while zz:
            low = zz & -zz
            c = low.bit_length() - 1
            ray_bits[c] |= 1 << idx
            zz ^= low
    all_rays = (1 << len(rays)) - 1

    new_rays, new_z = [], []
    for a, b in cand:
        p, q = pos[a], neg[b]
        common = zsets[p] & zsets[q]
        acc = all_rays
        target = (1 << p) | (1 << q)
        zz = common
        while zz:
            low = zz & -zz
            acc &= ray_bits[low.bit_length() - 1]
            if acc == target:
                break
            zz ^= low
        if acc != target:
            continue
        sp, sq = vals[p], -vals[q]
        r = [sp * x + sq * y for x, y in zip(rays[q], rays[p])]
        new_rays.append(primitive(r))
        new_z.append(common)
    return new_rays, new_z
