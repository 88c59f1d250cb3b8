"""Grid discretizations of boxes and circles with exact cell masses.

A discretization replaces the model by the centers ``x_i`` of a regular grid
of cells ``A_i`` and gives each center the model mass of its cell. Cells are
half-open (lower end closed) except the last one along each axis, so they are
disjoint and cover the model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .space import (
    METRICS,
    CapabilityError,
    FiniteMetricMeasureSpace,
    StructuralError,
    SubsetMask,
    pairwise_distances,
)

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Density:
    """Separable density on a box.

    ``uniform``: constant ``value``. ``affine``: ``prod_k (a_k + b_k x_k)``.
    ``exponential``: ``prod_k c_k exp(lam_k x_k)``.
    """

    type: str = "uniform"
    value: float = 1.0
    a: tuple = ()
    b: tuple = ()
    c: tuple = ()
    lam: tuple = ()

    @classmethod
    def from_json(cls, obj: Optional[dict]) -> "Density":
        obj = dict(obj or {"type": "uniform"})
        kind = obj.pop("type", "uniform")
        unknown = set(obj) - {"value", "a", "b", "c", "lam"}
        if unknown:
            raise StructuralError(f"density: unknown fields {sorted(unknown)}")
        return cls(kind, float(obj.get("value", 1.0)),
                   *(tuple(float(v) for v in obj.get(k, ())) for k in ("a", "b", "c", "lam")))

    def to_json(self) -> dict:
        if self.type == "uniform":
            return {"type": "uniform", "value": self.value}
        if self.type == "affine":
            return {"type": "affine", "a": list(self.a), "b": list(self.b)}
        return {"type": "exponential", "c": list(self.c), "lam": list(self.lam)}

    def axis_integral(self, k: int, lo, hi):
        """Integral of the k-th factor over ``[lo, hi]`` (vectorized)."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if self.type == "uniform":
            return (hi - lo) * (self.value if k == 0 else 1.0)
        if self.type == "affine":
            a, b = self.a[k], self.b[k]
            return a * (hi - lo) + 0.5 * b * (hi - lo) * (hi + lo)
        if self.type == "exponential":
            c, lam = self.c[k], self.lam[k]
            if lam == 0:
                return c * (hi - lo)
            return c * np.exp(lam * lo) * np.expm1(lam * (hi - lo)) / lam
        raise CapabilityError(f"unsupported density type {self.type!r}")

    def check(self, sides: Sequence[float]) -> None:
        dims = len(sides)
        if self.type == "uniform":
            if not self.value > 0:
                raise CapabilityError("uniform density value must be positive")
        elif self.type == "affine":
            if len(self.a) != dims or len(self.b) != dims:
                raise CapabilityError(f"affine density needs {dims} coefficients a and b")
            for a, b, side in zip(self.a, self.b, sides):
                # a linear factor is nonnegative on [0, side] iff it is at both ends
                if a < 0 or a + b * side < 0:
                    raise CapabilityError("affine density is negative on the box")
        elif self.type == "exponential":
            if len(self.c) != dims or len(self.lam) != dims:
                raise CapabilityError(f"exponential density needs {dims} coefficients c and lam")
            if any(c <= 0 for c in self.c):
                raise CapabilityError("exponential density needs positive c")
        else:
            raise CapabilityError(f"unsupported density type {self.type!r}")


@dataclass(frozen=True)
class ModelSpace:
    """A box ``prod_k [0, side_k]`` with a separable density, or a uniform circle.

    For a circle, ``sides`` holds the circumference and the metric is arc length.
    """

    kind: str = "box"
    sides: tuple = (1.0,)
    density: Density = field(default_factory=Density)
    metric: str = "l2"

    def __post_init__(self):
        object.__setattr__(self, "sides", tuple(float(x) for x in self.sides))
        if any(not x > 0 for x in self.sides):
            raise ValueError("side lengths must be positive")
        if self.kind == "box":
            if not 1 <= len(self.sides) <= 3:
                raise CapabilityError("boxes of dimension 1 to 3 are supported")
            if self.metric not in METRICS:
                raise CapabilityError(f"box metric must be one of {METRICS}")
            self.density.check(self.sides)
        elif self.kind == "circle":
            if len(self.sides) != 1:
                raise CapabilityError("a circle has a single circumference")
            if self.metric not in ("arc", "l2"):
                raise CapabilityError("circle metric is arc length")
            object.__setattr__(self, "metric", "arc")
            if self.density.type != "uniform":
                raise CapabilityError("circle supports uniform density only")
            self.density.check(self.sides)
        else:
            raise CapabilityError(f"unknown model kind {self.kind!r}")

    @property
    def dims(self) -> int:
        return len(self.sides)

    @classmethod
    def box(cls, sides=(1.0,), density=None, metric="l2") -> "ModelSpace":
        return cls("box", tuple(sides), density or Density(), metric)

    @classmethod
    def circle(cls, circumference=1.0, value=1.0) -> "ModelSpace":
        return cls("circle", (circumference,), Density("uniform", value), "arc")

    @classmethod
    def from_json(cls, obj: dict) -> "ModelSpace":
        if not isinstance(obj, dict):
            raise StructuralError("model spec must be a JSON object")
        kind = obj.get("kind", "box")
        if kind == "circle":
            circ = obj.get("circumference", (obj.get("sides") or [1.0])[0])
            value = (obj.get("density") or {}).get("value", 1.0)
            return cls.circle(float(circ), float(value))
        if "sides" not in obj:
            raise StructuralError("model spec: missing field 'sides'")
        return cls(kind, tuple(obj["sides"]), Density.from_json(obj.get("density")),
                   obj.get("metric", "l2"))

    def to_json(self) -> dict:
        if self.kind == "circle":
            return {"kind": "circle", "circumference": self.sides[0],
                    "density": self.density.to_json()}
        return {"kind": "box", "sides": list(self.sides), "density": self.density.to_json(),
                "metric": self.metric}

    def total_mass(self) -> float:
        out = 1.0
        for k, side in enumerate(self.sides):
            out *= float(self.density.axis_integral(k, 0.0, side))
        return out

    def distance(self, P, Q) -> np.ndarray:
        """Ambient distance between two coordinate arrays."""
        if self.kind == "circle":
            P = np.asarray(P, dtype=np.float64).reshape(-1)
            Q = np.asarray(Q, dtype=np.float64).reshape(-1)
            gap = np.abs(P[:, None] - Q[None, :])
            return np.minimum(gap, self.sides[0] - gap)
        return pairwise_distances(P, Q, self.metric)

    def covering_radius(self, cells: Sequence[int]) -> float:
        half = [0.5 * side / c for side, c in zip(self.sides, cells)]
        if self.kind == "circle" or self.metric == "linf":
            return max(half)
        if self.metric == "l1":
            return math.fsum(half)
        return math.sqrt(math.fsum(x * x for x in half))


def _cells(model: ModelSpace, cells_per_axis) -> tuple:
    if np.isscalar(cells_per_axis):
        cells_per_axis = (cells_per_axis,) * model.dims
    cells = tuple(int(c) for c in cells_per_axis)
    if len(cells) != model.dims:
        raise ValueError(f"need {model.dims} cell counts, got {len(cells)}")
    if any(c < 1 for c in cells):
        raise ValueError("cells_per_axis must be >= 1")
    return cells


def _grid_index(cells) -> np.ndarray:
    """Integer cell indices, last axis varying fastest."""
    return np.stack(np.meshgrid(*(np.arange(c) for c in cells), indexing="ij"),
                    axis=-1).reshape(-1, len(cells))


def discretize_grid(model: ModelSpace, cells_per_axis):
    """Cell-center discretization of `model`.

    Returns
    -------
    space : FiniteMetricMeasureSpace
        Cell centers with the ambient metric; weights are exact cell masses.
    h : float
        Covering radius, the largest distance from a cell point to its center.
    """
    cells = _cells(model, cells_per_axis)
    idx = _grid_index(cells)
    coords = np.empty(idx.shape, dtype=np.float64)
    weights = np.ones(idx.shape[0])
    for k, (side, c) in enumerate(zip(model.sides, cells)):
        edges = side * np.arange(c + 1) / c
        lo, hi = edges[:-1], edges[1:]
        coords[:, k] = (0.5 * (lo + hi))[idx[:, k]]
        weights *= model.density.axis_integral(k, lo, hi)[idx[:, k]]
    total = model.total_mass()
    if abs(math.fsum(weights) - total) > MASS_TOL * max(1.0, abs(total)):
        raise AssertionError(f"cell masses sum to {math.fsum(weights)!r}, model mass {total!r}")
    labels = [tuple(int(v) for v in row) for row in idx] if model.dims > 1 else idx[:, 0].tolist()
    space = FiniteMetricMeasureSpace(model.distance(coords, coords), weights, labels=labels,
                                     coords=coords, metric=model.metric)
    return space, model.covering_radius(cells)


@dataclass
class DiscretizationLink:
    """A coarse discretization together with a nested fine one.

    ``assignment[y]`` is the coarse point whose cell contains fine point ``y``;
    ``cross[x, y]`` is the ambient distance between coarse ``x`` and fine ``y``.
    """

    model: ModelSpace
    coarse: FiniteMetricMeasureSpace
    fine: FiniteMetricMeasureSpace
    assignment: np.ndarray
    h_coarse: float
    h_fine: float
    coarse_cells: tuple
    fine_cells: tuple
    cross: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.cross is None:
            self.cross = self.model.distance(self.coarse.coords, self.fine.coords)
        self.cross.setflags(write=False)
        self.assignment.setflags(write=False)

    def cell(self, i: int) -> SubsetMask:
        """Fine points of the cell of coarse point `i`."""
        return self.fine.mask(self.assignment == i)

    def check(self) -> None:
        """Assert the link invariants: total single-valued assignment, masses, covering."""
        a = self.assignment
        if a.shape != (self.fine.n,) or a.min() < 0 or a.max() >= self.coarse.n:
            raise AssertionError("assignment is not a total map into the coarse points")
        sums = np.bincount(a, weights=self.fine.weights, minlength=self.coarse.n)
        scale = max(1.0, self.coarse.total_mass)
        if np.max(np.abs(sums - self.coarse.weights)) > MASS_TOL * scale:
            raise AssertionError("fine cell masses do not add up to coarse weights")
        if np.any(self.cross[a, np.arange(self.fine.n)] > self.h_coarse):
            raise AssertionError("a fine point lies outside the covering radius")


def refine_link(model: ModelSpace, coarse_cells, fine_cells) -> DiscretizationLink:
    """Discretize `model` at two nested resolutions and link them."""
    cc = _cells(model, coarse_cells)
    fc = _cells(model, fine_cells)
    if any(f % c for c, f in zip(cc, fc)):
        raise ValueError(f"fine resolution {fc} does not nest in coarse resolution {cc}")
    coarse, h_coarse = discretize_grid(model, cc)
    fine, h_fine = discretize_grid(model, fc)
    fidx = _grid_index(fc) // np.array([f // c for c, f in zip(cc, fc)])
    assignment = np.ravel_multi_index(tuple(fidx.T), cc)
    link = DiscretizationLink(model, coarse, fine, assignment, h_coarse, h_fine, cc, fc)
    link.check()
    return link


def dilate_mass_lower_bound(link: DiscretizationLink, H: SubsetMask):
    """Masses ``(m(H^h), m_h(H))`` for a coarse subset `H`.

    ``H^h`` is the set of fine points within ``h_coarse`` of `H`; the first
    value is never smaller than the second.
    """
    link.coarse.check_member(H)
    if not H:
        return 0.0, 0.0
    near = link.cross[H.membership].min(axis=0) <= link.h_coarse
    return float(link.fine.weights[near].sum()), float(link.coarse.weights[H.membership].sum())


def restrict_mass_lower_bound(link: DiscretizationLink, A: SubsetMask):
    """Masses ``(m_h(A^h), m(A))`` for a fine subset `A`.

    ``A^h`` is the set of coarse points within ``h_coarse`` of `A`.
    """
    link.fine.check_member(A)
    if not A:
        return 0.0, 0.0
    near = link.cross[:, A.membership].min(axis=1) <= link.h_coarse
    return float(link.coarse.weights[near].sum()), float(link.fine.weights[A.membership].sum())
