"""Evaluation of approximate Brunn-Minkowski inequalities on finite spaces."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .intermediate import intermediate_set
from .space import (
    BMQuery,
    CapacityError,
    FiniteMetricMeasureSpace,
    SubsetMask,
    check_sh,
    dilate,
    mass,
)

TOL_REPORT = 1e-12
DEFAULT_S_GRID = tuple(round(0.1 * i, 10) for i in range(11))
EXHAUSTIVE_MAX_POINTS = 16

SATISFIED, VIOLATED, VACUOUS = "satisfied", "violated", "vacuous"


def _root(x: float, N: float) -> float:
    return 0.0 if x <= 0 else x ** (1.0 / N)


@dataclass
class BMReport:
    """Outcome of one inequality evaluation ``lhs >= rhs``."""

    lhs: float
    rhs: float
    deficit: float
    status: str
    witness: SubsetMask
    query: BMQuery
    K: SubsetMask
    L: SubsetMask
    kind: str = "dimensional"

    @property
    def ok(self) -> bool:
        return self.status != VIOLATED

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "deficit": self.deficit,
            "status": self.status,
            "s": self.query.s,
            "h": self.query.h,
            "N": self.query.N if self.kind == "dimensional" else None,
            "kind": self.kind,
            "K_indices": self.K.to_json(),
            "L_indices": self.L.to_json(),
            "witness_indices": self.witness.to_json(),
        }


def _status(K, L, deficit, tol):
    if not K or not L:
        return VACUOUS
    return SATISFIED if deficit >= -tol else VIOLATED


def bm_check(space: FiniteMetricMeasureSpace, C0: SubsetMask, C1: SubsetMask,
             q: BMQuery, tol: float = TOL_REPORT) -> BMReport:
    """Evaluate ``m(C_s^h)^(1/N) >= (1-s) m(C0)^(1/N) + s m(C1)^(1/N)``."""
    space.check_member(C0)
    space.check_member(C1)
    C = intermediate_set(space, C0, C1, q.s, q.h)
    lhs = _root(mass(space, C), q.N)
    rhs = (1 - q.s) * _root(mass(space, C0), q.N) + q.s * _root(mass(space, C1), q.N)
    deficit = lhs - rhs
    return BMReport(lhs, rhs, deficit, _status(C0, C1, deficit, tol), C, q, C0, C1)


def bm_mult_check(space: FiniteMetricMeasureSpace, C0: SubsetMask, C1: SubsetMask,
                  s: float, h: float, tol: float = TOL_REPORT) -> BMReport:
    """Evaluate the dimension-free form ``m(C_s^h) >= m(C0)^(1-s) m(C1)^s``."""
    q = BMQuery(1.0, s, h)
    space.check_member(C0)
    space.check_member(C1)
    C = intermediate_set(space, C0, C1, s, h)
    lhs = mass(space, C)
    rhs = mass(space, C0) ** (1 - s) * mass(space, C1) ** s
    deficit = lhs - rhs
    return BMReport(lhs, rhs, deficit, _status(C0, C1, deficit, tol), C, q, C0, C1,
                    kind="multiplicative")


# -- exhaustive search over all subset pairs ----------------------------------


def _pair_masks(D: np.ndarray, s: float, h: float) -> np.ndarray:
    """Bitmask of ``C_s^h({k}, {l})`` for every pair, same comparisons as above."""
    n = D.shape[0]
    t = 1.0 - s
    ok = np.abs(D[:, None, :] - s * D[:, :, None]) <= h        # [k, l, x]
    ok &= np.abs(D.T[None, :, :] - t * D[:, :, None]) <= h      # D[x, l] at [k, l, x]
    bits = np.left_shift(np.uint32(1), np.arange(n, dtype=np.uint32))
    return (ok * bits).sum(axis=2).astype(np.uint32)


def _subset_table(w: np.ndarray) -> np.ndarray:
    table = np.zeros(1, dtype=np.float64)
    for wi in w:
        table = np.concatenate([table, table + wi])
    return table


@numba.njit(cache=True)
def _worst_pair(P, root, s, n):  # pragma: no cover - compiled
    full = 1 << n
    RL = np.zeros((full, n), dtype=np.uint32)
    seen = np.zeros(full, dtype=np.int64)
    lattice = np.empty(full, dtype=np.uint32)
    best, bestK, bestL = np.inf, 0, 0
    for L in range(1, full):
        low = L & -L
        j = 0
        while (low >> j) != 1:
            j += 1
        prev = L ^ low
        for k in range(n):
            RL[L, k] = RL[prev, k] | P[k, j]
        # every union of the sets R(k) = C({k}, L)
        size = 1
        lattice[0] = 0
        seen[0] = L
        for k in range(n):
            r = RL[L, k]
            if r == 0:
                continue
            cur = size
            for i in range(cur):
                v = lattice[i] | r
                if seen[v] != L:
                    seen[v] = L
                    lattice[size] = v
                    size += 1
        rhs_l = s * root[L]
        for i in range(size):
            u = lattice[i]
            # largest K whose intermediate set with L stays inside u
            K = 0
            for k in range(n):
                if RL[L, k] & ~u == 0:
                    K |= 1 << k
            if K == 0:
                continue
            d = root[u] - (1.0 - s) * root[K] - rhs_l
            if d < best:
                best, bestK, bestL = d, K, L
    return best, bestK, bestL


def bm_exhaustive_check(space: FiniteMetricMeasureSpace, N: float, h: float,
                        s_grid: Sequence[float] = DEFAULT_S_GRID,
                        tol: float = TOL_REPORT) -> BMReport:
    """Minimum-deficit report over all nonempty subset pairs and all `s` in `s_grid`.

    For a fixed ``L`` the deficit only improves when ``K`` absorbs every point
    whose intermediate set with ``L`` is already covered, so it suffices to
    visit one such closed ``K`` per union of single-point intermediate sets.
    """
    n = space.n
    if n > EXHAUSTIVE_MAX_POINTS:
        raise CapacityError(
            f"exhaustive check is limited to {EXHAUSTIVE_MAX_POINTS} points, got {n}"
        )
    if n == 0:
        raise ValueError("space has no points")
    if not list(s_grid):
        raise ValueError("s_grid must be nonempty")
    root = _subset_table(space.weights)
    root = np.where(root > 0, np.maximum(root, 0.0) ** (1.0 / N), 0.0)
    worst = None
    for s in s_grid:
        check_sh(s, h)
        P = _pair_masks(space.dist, float(s), float(h))
        _, Kbits, Lbits = _worst_pair(P, root, float(s), n)
        K = space.mask([(Kbits >> i) & 1 for i in range(n)])
        L = space.mask([(Lbits >> i) & 1 for i in range(n)])
        report = bm_check(space, K, L, BMQuery(N, float(s), h), tol)
        if worst is None or report.deficit < worst.deficit:
            worst = report
    return worst


# -- randomized search ---------------------------------------------------------

PROPOSALS = ("random-union", "metric-ball", "dilation-perturbation")


@dataclass
class SearchConfig:
    seed: int = 0
    iterations: int = 200
    s_grid: Sequence[float] = DEFAULT_S_GRID
    proposals: Sequence[str] = PROPOSALS
    min_size: int = 1
    max_size: Optional[int] = None
    restart_every: int = 10
    top_k: int = 20

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not len(self.s_grid):
            raise ValueError("s_grid must be nonempty")
        for s in self.s_grid:
            if not 0 <= s <= 1:
                raise ValueError(f"s_grid value {s} outside [0, 1]")
        unknown = set(self.proposals) - set(PROPOSALS)
        if unknown or not len(self.proposals):
            raise ValueError(f"proposals must be a nonempty subset of {PROPOSALS}")
        if self.min_size < 1 or (self.max_size is not None and self.max_size < self.min_size):
            raise ValueError("invalid subset size bounds")


class _Proposer:
    def __init__(self, space, cfg, rng):
        self.space = space
        self.cfg = cfg
        self.rng = rng
        self.max_size = min(space.n, cfg.max_size or space.n)
        self.min_size = min(cfg.min_size, self.max_size)

    def random_union(self):
        size = int(self.rng.integers(self.min_size, self.max_size + 1))
        return self.space.subset(self.rng.choice(self.space.n, size=size, replace=False))

    def metric_ball(self):
        center = int(self.rng.integers(self.space.n))
        radius = float(self.rng.uniform(0, 0.5 * self.space.diameter))
        ball = dilate(self.space, self.space.subset([center]), radius)
        return self._clip(ball)

    def _clip(self, A):
        idx = A.indices
        if idx.size > self.max_size:
            idx = self.rng.choice(idx, size=self.max_size, replace=False)
        return self.space.subset(idx)

    def perturb(self, A):
        """Add a point near the boundary of `A` or remove one of its points."""
        idx = A.indices
        outside = np.flatnonzero(~A.membership)
        grow = outside.size and (idx.size <= self.min_size or self.rng.random() < 0.5)
        if grow and idx.size < self.max_size:
            gap = self.space.dist[np.ix_(idx, outside)].min(axis=0)
            near = outside[np.argsort(gap, kind="stable")[:3]]
            return self.space.subset(np.append(idx, self.rng.choice(near)))
        if idx.size > self.min_size:
            return self.space.subset(np.delete(idx, self.rng.integers(idx.size)))
        return A

    def fresh(self):
        kinds = [k for k in self.cfg.proposals if k != "dilation-perturbation"] or ["random-union"]
        kind = kinds[int(self.rng.integers(len(kinds)))]
        make = self.metric_ball if kind == "metric-ball" else self.random_union
        return make(), make()


def bm_search_violations(space: FiniteMetricMeasureSpace, N: float, h: float,
                         cfg: SearchConfig, tol: float = TOL_REPORT) -> list:
    """Seeded local search for subset pairs with the most negative deficit.

    The first proposal is the pair of singletons at maximal distance. Later
    proposals perturb the current worst pair, with fresh random pairs every
    ``cfg.restart_every`` iterations. Returns up to ``cfg.top_k`` distinct
    reports sorted by ascending deficit.
    """
    if space.n == 0:
        raise ValueError("space has no points")
    rng = np.random.default_rng(cfg.seed)
    prop = _Proposer(space, cfg, rng)
    seen = {}
    worst_pair, worst_deficit = None, math.inf

    far = int(np.argmax(space.dist))
    pair = (space.subset([far // space.n]), space.subset([far % space.n]))
    perturbing = "dilation-perturbation" in cfg.proposals
    for it in range(cfg.iterations):
        if it > 0:
            if worst_pair is None or not perturbing or it % cfg.restart_every == 0:
                pair = prop.fresh()
            elif rng.random() < 0.5:
                pair = (prop.perturb(worst_pair[0]), worst_pair[1])
            else:
                pair = (worst_pair[0], prop.perturb(worst_pair[1]))
        K, L = pair
        if not K or not L:
            continue
        for s in cfg.s_grid:
            key = (K.membership.tobytes(), L.membership.tobytes(), float(s))
            if key in seen:
                rep = seen[key][1]
            else:
                rep = bm_check(space, K, L, BMQuery(N, float(s), h), tol)
                seen[key] = (len(seen), rep)
            if rep.deficit < worst_deficit:
                worst_deficit, worst_pair = rep.deficit, (K, L)
    ordered = sorted(seen.values(), key=lambda item: (item[1].deficit, item[0]))
    return [rep for _, rep in ordered[: cfg.top_k]]
