"""Couplings between two finite spaces under a cross distance.

The quadratic cost of a coupling under a fixed cross distance is an upper
bound on the transport distance between the two spaces; nothing here searches
over cross distances.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .discretize import DiscretizationLink
from .space import (
    CapacityError,
    FiniteMetricMeasureSpace,
    StructuralError,
    SubsetMask,
    pairwise_distances,
)

MARGINAL_TOL = 1e-9
OT_MAX_POINTS = 2000


@dataclass
class CrossDistance:
    """Nonnegative distances ``matrix[x, y]`` from points of `a` to points of `b`."""

    matrix: np.ndarray
    a: FiniteMetricMeasureSpace
    b: FiniteMetricMeasureSpace

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (self.a.n, self.b.n):
            raise StructuralError(f"cross distance of shape {m.shape} for spaces "
                                  f"of sizes {self.a.n} and {self.b.n}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("cross distances must be finite and nonnegative")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def ambient(cls, a, b, metric=None) -> "CrossDistance":
        """Distances between the coordinates of two spaces embedded in one model."""
        if a.coords is None or b.coords is None:
            raise StructuralError("ambient cross distance needs coordinates on both spaces")
        metric = metric or a.metric
        if metric != b.metric:
            raise StructuralError(f"spaces use different metrics {a.metric!r} and {b.metric!r}")
        return cls(pairwise_distances(a.coords, b.coords, metric), a, b)

    @classmethod
    def from_link(cls, link: DiscretizationLink) -> "CrossDistance":
        return cls(link.cross, link.coarse, link.fine)

    @property
    def T(self) -> "CrossDistance":
        return CrossDistance(self.matrix.T, self.b, self.a)

    def triangle_excess(self) -> float:
        """Largest violation of ``d(x,y) <= d(x,y') + d_b(y',y)`` and ``d(x,y) <= d_a(x,x') + d(x',y)``."""
        M = self.matrix
        via_b = (M[:, :, None] + self.b.dist[None, :, :]).min(axis=1)
        via_a = (self.a.dist[:, :, None] + M[None, :, :]).min(axis=1)
        return float(max((M - via_b).max(), (M - via_a).max(), 0.0))


@dataclass
class Coupling:
    """Joint mass ``q[x, y]`` whose marginals are the weights of `a` and `b`."""

    q: np.ndarray
    a: FiniteMetricMeasureSpace
    b: FiniteMetricMeasureSpace
    tol: float = MARGINAL_TOL

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.shape != (self.a.n, self.b.n):
            raise StructuralError(f"coupling of shape {q.shape} for spaces "
                                  f"of sizes {self.a.n} and {self.b.n}")
        if np.any(q < 0):
            raise ValueError("coupling entries must be nonnegative")
        if np.max(np.abs(q.sum(axis=1) - self.a.weights), initial=0) > self.tol:
            raise ValueError("row sums of the coupling differ from the first marginal")
        if np.max(np.abs(q.sum(axis=0) - self.b.weights), initial=0) > self.tol:
            raise ValueError("column sums of the coupling differ from the second marginal")
        q.setflags(write=False)
        self.q = q

    @property
    def T(self) -> "Coupling":
        return Coupling(self.q.T, self.b, self.a, self.tol)

    def to_json(self) -> list:
        rows, cols = np.nonzero(self.q)
        return [{"a": int(i), "b": int(j), "q": float(self.q[i, j])} for i, j in zip(rows, cols)]

    @classmethod
    def from_json(cls, triplets, a, b, tol=MARGINAL_TOL) -> "Coupling":
        q = np.zeros((a.n, b.n))
        for t in triplets:
            q[int(t["a"]), int(t["b"])] += float(t["q"])
        return cls(q, a, b, tol)


def _check_pair(q: Coupling, cross: CrossDistance) -> None:
    if q.q.shape != cross.matrix.shape:
        raise StructuralError(f"coupling shape {q.q.shape} != cross distance shape "
                              f"{cross.matrix.shape}")


def coupling_cost(q: Coupling, cross: CrossDistance) -> float:
    """``(sum_{x,y} d(x,y)^2 q(x,y))^(1/2)``."""
    _check_pair(q, cross)
    return float(np.sqrt(np.sum(cross.matrix ** 2 * q.q)))


def natural_discretization_coupling(link: DiscretizationLink) -> Coupling:
    """Send the mass of every fine point to the center of its coarse cell."""
    q = np.zeros((link.coarse.n, link.fine.n))
    q[link.assignment, np.arange(link.fine.n)] = link.fine.weights
    return Coupling(q, link.coarse, link.fine)


def ot_coupling(a: FiniteMetricMeasureSpace, b: FiniteMetricMeasureSpace,
                cross: CrossDistance):
    """Coupling of the weights of `a` and `b` with minimal quadratic cost.

    Solved exactly as a transportation linear program (HiGHS dual simplex).

    Returns
    -------
    coupling : Coupling
    cost : float
        ``coupling_cost(coupling, cross)``, the least cost for this cross distance.
    """
    if cross.a is not a or cross.b is not b:
        raise StructuralError("cross distance is not defined between these spaces")
    n, m = a.n, b.n
    if max(n, m) > OT_MAX_POINTS:
        raise CapacityError(f"ot_coupling supports at most {OT_MAX_POINTS} points per side")
    if abs(a.total_mass - b.total_mass) > MARGINAL_TOL:
        raise ValueError(f"total masses differ: {a.total_mass!r} vs {b.total_mass!r}")
    cost = (cross.matrix ** 2).ravel()
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    # the last column constraint is implied by the others
    A_eq = sparse.vstack([rows, cols.tocsr()[:-1]]).tocsc()
    b_eq = np.concatenate([a.weights, b.weights[:-1]])
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    q = np.maximum(res.x.reshape(n, m), 0.0)
    coupling = Coupling(q, a, b)
    return coupling, coupling_cost(coupling, cross)


def transfer_set(cross: CrossDistance, C: SubsetMask, eps: float) -> SubsetMask:
    """Points of ``cross.a`` within `eps` of the subset `C` of ``cross.b``."""
    if not eps >= 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    cross.b.check_member(C)
    if not C:
        return cross.a.empty()
    return cross.a.mask(cross.matrix[:, C.membership].min(axis=1) <= eps)


def markov_mass_bound(q: Coupling, cross: CrossDistance, C: SubsetMask, eps: float):
    """Mass the coupling sends from outside the `eps`-transfer of `C` into `C`.

    Every such pair is at least `eps` apart, so the mass is at most
    ``coupling_cost(q, cross)**2 / eps**2``.

    Returns
    -------
    far_mass, bound : float
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    _check_pair(q, cross)
    near = transfer_set(cross, C, eps)
    far_mass = float(q.q[np.ix_(~near.membership, C.membership)].sum())
    return far_mass, coupling_cost(q, cross) ** 2 / eps ** 2


def transfer_mass_bound(q: Coupling, cross: CrossDistance, C: SubsetMask, eps: float):
    """``(mass of transfer_set(C, eps), mass of C minus the Markov bound)``.

    The first value is at least the second.
    """
    _, bound = markov_mass_bound(q, cross, C, eps)
    near = transfer_set(cross, C, eps)
    return (float(cross.a.weights[near.membership].sum()),
            float(cross.b.weights[C.membership].sum()) - bound)
