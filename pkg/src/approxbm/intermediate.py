"""Approximate s-intermediate sets between two subsets of a finite space.

A point ``x`` is an h-approximate s-intermediate point of ``K`` and ``L`` when
some pair ``(k, l)`` in ``K x L`` satisfies::

    |d(k, x) - s d(k, l)|       <= h
    |d(x, l) - (1 - s) d(k, l)| <= h

Both implementations below evaluate these two comparisons with the same
floating point operations, so their outputs agree bit for bit.
"""
from __future__ import annotations

import numpy as np

from .space import FiniteMetricMeasureSpace, SubsetMask, check_sh

# elements per boolean block in the vectorized witness scan
_BLOCK = 1 << 22
# relative slack on the pruning radii; pruning must never drop a true member
_PRUNE_PAD = 1e-9


def _prepare(space, K, L, s, h):
    check_sh(s, h)
    space.check_member(K)
    space.check_member(L)
    return float(s), 1.0 - float(s), float(h)


def intermediate_set_bruteforce(space: FiniteMetricMeasureSpace, K: SubsetMask,
                                L: SubsetMask, s: float, h: float) -> SubsetMask:
    """Reference implementation: exhaustive scan over all ``(x, k, l)`` triples."""
    s, t, h = _prepare(space, K, L, s, h)
    D = space.dist.tolist()
    ks, ls = K.indices.tolist(), L.indices.tolist()
    member = np.zeros(space.n, dtype=bool)
    for x in range(space.n):
        for k in ks:
            for l in ls:
                dkl = D[k][l]
                if abs(D[k][x] - s * dkl) <= h and abs(D[x][l] - t * dkl) <= h:
                    member[x] = True
                    break
            if member[x]:
                break
    return SubsetMask(member, space.token)


def intermediate_set(space: FiniteMetricMeasureSpace, K: SubsetMask, L: SubsetMask,
                     s: float, h: float) -> SubsetMask:
    """Approximate s-intermediate set ``C_s^h(K, L)``.

    Candidates farther than ``s * max d(K, L) + h`` from `K` (or
    ``(1 - s) * max d(K, L) + h`` from `L`) cannot have a witness and are
    skipped. The remaining candidates are scanned against ``K x L`` in blocks
    of `K` rows, dropping each candidate once a witness is found.
    """
    s, t, h = _prepare(space, K, L, s, h)
    n = space.n
    if not K or not L:
        return space.empty()
    D = space.dist
    ks, ls = K.indices, L.indices
    DKL = D[np.ix_(ks, ls)]
    sDKL = s * DKL
    tDKL = t * DKL

    reach = float(DKL.max())
    near_k = D[ks].min(axis=0)
    near_l = D[ls].min(axis=0)
    lim_k = (s * reach + h) * (1 + _PRUNE_PAD) + _PRUNE_PAD * reach
    lim_l = (t * reach + h) * (1 + _PRUNE_PAD) + _PRUNE_PAD * reach
    active = np.flatnonzero((near_k <= lim_k) & (near_l <= lim_l))

    member = np.zeros(n, dtype=bool)
    nl = ls.size
    start = 0
    while start < ks.size and active.size:
        stop = min(ks.size, start + max(1, _BLOCK // (active.size * nl)))
        kb = ks[start:stop]
        a = D[np.ix_(kb, active)]                        # (bk, na)
        b = D[np.ix_(active, ls)]                        # (na, nl)
        ok = np.abs(a[:, :, None] - sDKL[start:stop, None, :]) <= h
        ok &= np.abs(b[None, :, :] - tDKL[start:stop, None, :]) <= h
        hit = ok.any(axis=(0, 2))
        member[active[hit]] = True
        active = active[~hit]
        start = stop
    return SubsetMask(member, space.token)
