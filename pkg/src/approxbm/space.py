"""Finite metric measure spaces and their subsets."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

_token_counter = itertools.count(1)

METRICS = ("l2", "l1", "linf")


class StructuralError(ValueError):
    """Inputs disagree in shape or belong to different spaces."""


class CapacityError(ValueError):
    """Problem size exceeds a documented cap."""


class CapabilityError(ValueError):
    """Requested combination of options is not supported."""


def pairwise_distances(P: np.ndarray, Q: np.ndarray, metric: str = "l2") -> np.ndarray:
    """Dense distance matrix between the rows of `P` and the rows of `Q`."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    diff = np.abs(P[:, None, :] - Q[None, :, :])
    if metric == "l2":
        return np.sqrt((diff * diff).sum(axis=-1))
    if metric == "l1":
        return diff.sum(axis=-1)
    if metric == "linf":
        return diff.max(axis=-1)
    raise CapabilityError(f"unknown metric {metric!r}; expected one of {METRICS}")


class FiniteMetricMeasureSpace:
    """A finite set of points with a dense distance matrix and positive weights.

    Only structural checks (shapes, finiteness) happen on construction. The
    metric axioms are checked by :func:`validate_space`, which is O(n^3).

    Parameters
    ----------
    dist : array, shape (n, n)
        Pairwise distances.
    weights : array, shape (n,)
        Point masses.
    labels : sequence, optional
        Point identifiers, defaults to ``range(n)``.
    coords : array, shape (n, dim), optional
        Embedding coordinates for spaces built from a model.
    metric : str, optional
        Name of the ambient metric `coords` were measured in.
    """

    def __init__(self, dist, weights, labels=None, coords=None, metric=None):
        dist = np.array(dist, dtype=np.float64)
        weights = np.array(weights, dtype=np.float64).reshape(-1)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise StructuralError(f"distance matrix must be square, got shape {dist.shape}")
        n = dist.shape[0]
        if weights.shape[0] != n:
            raise StructuralError(
                f"{weights.shape[0]} weights for a {n}x{n} distance matrix"
            )
        if not (np.all(np.isfinite(dist)) and np.all(np.isfinite(weights))):
            raise StructuralError("distances and weights must be finite")
        if labels is None:
            labels = list(range(n))
        labels = list(labels)
        if len(labels) != n:
            raise StructuralError(f"{len(labels)} labels for {n} points")
        if coords is not None:
            coords = np.array(coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n:
                raise StructuralError(f"{coords.shape[0]} coordinate rows for {n} points")
            coords.setflags(write=False)
        dist.setflags(write=False)
        weights.setflags(write=False)
        self.dist = dist
        self.weights = weights
        self.labels = labels
        self.coords = coords
        self.metric = metric
        self.token = next(_token_counter)

    @classmethod
    def from_coords(cls, coords, weights=None, metric: str = "l2", labels=None):
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim == 1:
            coords = coords[:, None]
        if weights is None:
            weights = np.full(coords.shape[0], 1.0 / coords.shape[0])
        return cls(pairwise_distances(coords, coords, metric), weights,
                   labels=labels, coords=coords, metric=metric)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"FiniteMetricMeasureSpace(n={self.n}, mass={self.total_mass:.6g})"

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def subset(self, indices: Iterable[int] = ()) -> "SubsetMask":
        member = np.zeros(self.n, dtype=bool)
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise StructuralError(f"subset index out of range for a {self.n}-point space")
        member[idx] = True
        return SubsetMask(member, self.token)

    def mask(self, membership) -> "SubsetMask":
        membership = np.asarray(membership, dtype=bool)
        if membership.shape != (self.n,):
            raise StructuralError(
                f"membership of length {membership.shape} for a {self.n}-point space"
            )
        return SubsetMask(membership, self.token)

    def full(self) -> "SubsetMask":
        return SubsetMask(np.ones(self.n, dtype=bool), self.token)

    def empty(self) -> "SubsetMask":
        return SubsetMask(np.zeros(self.n, dtype=bool), self.token)

    def check_member(self, A: "SubsetMask") -> None:
        if A.parent != self.token:
            raise StructuralError("subset belongs to a different space")

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        out = {"labels": list(self.labels), "weights": self.weights.tolist()}
        if self.coords is not None and self.metric in METRICS:
            out["coords"] = self.coords.tolist()
            out["metric"] = self.metric
        else:
            out["dist"] = self.dist.tolist()
            if self.coords is not None:
                out["coords"] = self.coords.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteMetricMeasureSpace":
        if not isinstance(obj, dict):
            raise StructuralError("space file must hold a JSON object")
        if "weights" not in obj:
            raise StructuralError("space file: missing field 'weights'")
        labels = obj.get("labels")
        if "dist" in obj:
            return cls(obj["dist"], obj["weights"], labels=labels,
                       coords=obj.get("coords"), metric=obj.get("metric"))
        if "coords" in obj:
            metric = obj.get("metric", "l2")
            if metric not in METRICS:
                raise StructuralError(f"space file: field 'metric' must be one of {METRICS}")
            coords = np.asarray(obj["coords"], dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.ndim != 2:
                raise StructuralError("space file: field 'coords' must be a list of vectors")
            weights = np.asarray(obj["weights"], dtype=np.float64)
            if weights.shape != (coords.shape[0],):
                raise StructuralError(
                    f"space file: {weights.size} weights for {coords.shape[0]} coords"
                )
            return cls.from_coords(coords, weights, metric=metric, labels=labels)
        raise StructuralError("space file: need either 'dist' or 'coords'")

    @classmethod
    def load(cls, path) -> "FiniteMetricMeasureSpace":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


@dataclass(frozen=True, eq=False)
class SubsetMask:
    """Boolean membership vector over the points of one parent space."""

    membership: np.ndarray
    parent: int

    def __post_init__(self):
        m = np.array(self.membership, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.membership)

    def __len__(self) -> int:
        return int(self.membership.sum())

    def __bool__(self) -> bool:
        return bool(self.membership.any())

    def __contains__(self, i) -> bool:
        return bool(self.membership[i])

    def __iter__(self):
        return iter(self.indices.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubsetMask):
            return NotImplemented
        return self.parent == other.parent and np.array_equal(self.membership, other.membership)

    def __hash__(self):
        return hash((self.parent, self.membership.tobytes()))

    def __repr__(self) -> str:
        return f"SubsetMask({self.indices.tolist()})"

    def _same_parent(self, other: "SubsetMask") -> None:
        if self.parent != other.parent:
            raise StructuralError("subsets belong to different spaces")

    def __or__(self, other):
        self._same_parent(other)
        return SubsetMask(self.membership | other.membership, self.parent)

    def __and__(self, other):
        self._same_parent(other)
        return SubsetMask(self.membership & other.membership, self.parent)

    def __sub__(self, other):
        self._same_parent(other)
        return SubsetMask(self.membership & ~other.membership, self.parent)

    def issubset(self, other: "SubsetMask") -> bool:
        self._same_parent(other)
        return not np.any(self.membership & ~other.membership)

    def complement(self) -> "SubsetMask":
        return SubsetMask(~self.membership, self.parent)

    def to_json(self) -> list:
        return self.indices.tolist()


@dataclass(frozen=True)
class BMQuery:
    """Dimension `N`, interpolation time `s` and slack `h` of one BM evaluation."""

    N: float
    s: float
    h: float

    def __post_init__(self):
        check_sh(self.s, self.h)
        if not self.N >= 1:
            raise ValueError(f"N must be >= 1, got {self.N}")


def check_sh(s: float, h: float) -> None:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    if not h >= 0.0:
        raise ValueError(f"h must be >= 0, got {h}")


@dataclass
class Violation:
    kind: str
    detail: str
    where: tuple = ()
    amount: float = 0.0


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def to_json(self) -> dict:
        return {
            "valid": self.valid,
            "violations": [
                {"kind": v.kind, "detail": v.detail, "where": list(v.where), "amount": v.amount}
                for v in self.violations
            ],
        }


def validate_space(space: FiniteMetricMeasureSpace, tol_tri: Optional[float] = None) -> ValidationReport:
    """Check every metric-measure axiom and report the worst offender of each kind.

    `tol_tri` defaults to ``1e-9 * max distance``.
    """
    D, w = space.dist, space.weights
    n = space.n
    if D.shape != (n, n) or w.shape != (n,):
        raise StructuralError("distance matrix and weight vector disagree")
    report = ValidationReport()
    if n == 0:
        report.violations.append(Violation("empty", "space has no points"))
        return report
    scale = float(D.max()) if D.size else 0.0
    if tol_tri is None:
        tol_tri = 1e-9 * scale

    diag = np.abs(np.diag(D))
    if np.any(diag != 0):
        i = int(np.argmax(diag))
        report.violations.append(
            Violation("diagonal", f"d({i},{i}) = {D[i, i]!r} is not zero", (i,), float(diag[i]))
        )
    if np.any(D < 0):
        i, j = np.unravel_index(np.argmin(D), D.shape)
        report.violations.append(
            Violation("negative", f"d({i},{j}) = {D[i, j]!r} is negative", (int(i), int(j)),
                      float(-D[i, j]))
        )
    asym = np.abs(D - D.T)
    if np.any(asym != 0):
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        report.violations.append(
            Violation("asymmetry", f"d({i},{j}) = {D[i, j]!r} but d({j},{i}) = {D[j, i]!r}",
                      (int(i), int(j)), float(asym[i, j]))
        )

    worst, triple = 0.0, None
    for j in range(n):
        # excess[i, k] = d(i,k) - d(i,j) - d(j,k)
        excess = D - D[:, j][:, None] - D[j, :][None, :]
        k = int(np.argmax(excess))
        if excess.flat[k] > worst:
            worst = float(excess.flat[k])
            triple = (k // n, j, k % n)
    if triple is not None and worst > tol_tri:
        i, j, k = triple
        report.violations.append(
            Violation("triangle",
                      f"d({i},{k}) = {D[i, k]!r} > d({i},{j}) + d({j},{k}) = {D[i, j] + D[j, k]!r}",
                      triple, worst)
        )

    bad = np.flatnonzero(w <= 0)
    if bad.size:
        report.violations.append(
            Violation("weight", f"nonpositive weight at points {bad.tolist()}",
                      tuple(int(b) for b in bad), float(-w[bad].min()))
        )
    return report


def mass(space: FiniteMetricMeasureSpace, A: SubsetMask) -> float:
    space.check_member(A)
    return float(space.weights[A.membership].sum())


def dilate(space: FiniteMetricMeasureSpace, A: SubsetMask, eps: float) -> SubsetMask:
    """Closed `eps`-neighbourhood ``{y : d(A, y) <= eps}``; empty for empty `A`."""
    if not eps >= 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    space.check_member(A)
    if not A:
        return space.empty()
    near = space.dist[A.membership].min(axis=0) <= eps
    return SubsetMask(near | A.membership, space.token)


def theta(space: FiniteMetricMeasureSpace, K: SubsetMask, L: SubsetMask, mode: str = "min") -> float:
    """Minimal or maximal distance between a point of `K` and a point of `L`."""
    space.check_member(K)
    space.check_member(L)
    if not K or not L:
        raise ValueError("theta is undefined for an empty set")
    cross = space.dist[np.ix_(K.membership, L.membership)]
    if mode == "min":
        return float(cross.min())
    if mode == "max":
        return float(cross.max())
    raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")


def path_space(n: int, weights: Optional[Sequence[float]] = None) -> FiniteMetricMeasureSpace:
    """Points ``0..n-1`` on a line with ``d(i, j) = |i - j|``."""
    idx = np.arange(n, dtype=np.float64)
    if weights is None:
        weights = np.ones(n)
    return FiniteMetricMeasureSpace(np.abs(idx[:, None] - idx[None, :]), weights,
                                    coords=idx[:, None], metric="l1")


def cycle_space(n: int, weights: Optional[Sequence[float]] = None,
                edge: float = 1.0) -> FiniteMetricMeasureSpace:
    """Graph metric of the n-cycle with uniform edge length."""
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    D = edge * np.minimum(gap, n - gap).astype(np.float64)
    if weights is None:
        weights = np.full(n, 1.0 / n)
    return FiniteMetricMeasureSpace(D, weights)
