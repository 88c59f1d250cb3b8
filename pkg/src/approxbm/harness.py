"""Reproducible experiments: discretization sweeps and stability-proof replays."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .bm import DEFAULT_S_GRID, TOL_REPORT, VACUOUS, VIOLATED, bm_check, bm_exhaustive_check
from .coupling import (
    CrossDistance,
    coupling_cost,
    markov_mass_bound,
    natural_discretization_coupling,
    transfer_set,
)
from .discretize import ModelSpace, _cells, discretize_grid, refine_link
from .intermediate import intermediate_set
from .space import BMQuery, CapacityError, FiniteMetricMeasureSpace, StructuralError, mass

MAX_POINTS = 5000
CSV_COLUMNS = ("resolution", "h", "eps", "s", "N", "lhs", "rhs", "deficit", "status", "K", "L")
COMPACT_TYPES = ("slab", "ball", "rect", "random", "indices", "all")


@dataclass(frozen=True)
class CompactSpec:
    """Named subset constructor, resolved against the coordinates of a grid.

    ``slab``: ``lo <= x[axis] <= hi``; ``rect``: ``lo <= x <= hi`` per axis;
    ``ball``: ambient distance to ``center`` at most ``radius``; ``random``:
    each point kept with probability ``fraction``; ``indices``: explicit
    point indices; ``all``: every point.
    """

    name: str
    type: str
    params: dict = field(default_factory=dict, hash=False, compare=False)

    @classmethod
    def from_json(cls, obj: dict) -> "CompactSpec":
        obj = dict(obj)
        try:
            name, kind = obj.pop("name"), obj.pop("type")
        except KeyError as err:
            raise StructuralError(f"compact spec: missing field {err.args[0]!r}") from None
        if kind not in COMPACT_TYPES:
            raise StructuralError(f"compact {name!r}: unknown type {kind!r}")
        return cls(name, kind, obj)

    def to_json(self) -> dict:
        return {"name": self.name, "type": self.type, **self.params}

    def resolve(self, space: FiniteMetricMeasureSpace, model: ModelSpace,
                rng: Optional[np.random.Generator] = None):
        p, X = self.params, space.coords
        if self.type == "all":
            return space.full()
        if self.type == "indices":
            idx = np.asarray(p["indices"], dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= space.n):
                raise StructuralError(f"compact {self.name!r}: index out of range at {space.n} points")
            return space.subset(idx)
        if self.type == "slab":
            x = X[:, int(p.get("axis", 0))]
            return space.mask((x >= p["lo"]) & (x <= p["hi"]))
        if self.type == "rect":
            lo, hi = np.asarray(p["lo"], float), np.asarray(p["hi"], float)
            return space.mask(np.all((X >= lo) & (X <= hi), axis=1))
        if self.type == "ball":
            d = model.distance(np.atleast_2d(np.asarray(p["center"], float)), X)[0]
            return space.mask(d <= p["radius"])
        if self.type == "random":
            keep = rng.random(space.n) < float(p.get("fraction", 0.3))
            if not keep.any():
                keep[rng.integers(space.n)] = True
            return space.mask(keep)
        raise StructuralError(f"compact {self.name!r}: unknown type {self.type!r}")


@dataclass
class ExperimentSpec:
    model: ModelSpace
    resolutions: list
    compacts: list
    N: float = 1.0
    s_grid: Sequence[float] = DEFAULT_S_GRID
    h: Union[str, float] = "exact-4h"
    pairs: Optional[list] = None
    seed: int = 0
    exhaustive: bool = False
    stability: dict = field(default_factory=dict)
    tol: float = TOL_REPORT

    def __post_init__(self):
        self.resolutions = [_cells(self.model, r) for r in self.resolutions]
        if not self.resolutions:
            raise ValueError("resolutions must be nonempty")
        sizes = [math.prod(r) for r in self.resolutions]
        if sizes != sorted(sizes):
            raise ValueError("resolutions must be ascending")
        if not (self.h == "exact-4h" or (isinstance(self.h, (int, float)) and self.h >= 0)):
            raise ValueError("h must be 'exact-4h' or a nonnegative number")
        names = [c.name for c in self.compacts]
        if len(set(names)) != len(names):
            raise ValueError("compact names must be unique")
        if self.pairs is None:
            self.pairs = list(itertools.combinations_with_replacement(names, 2))
        self.pairs = [tuple(p) for p in self.pairs]
        for p in self.pairs:
            if len(p) != 2 or not set(p) <= set(names):
                raise ValueError(f"pair {p} names an unknown compact")
        BMQuery(self.N, 0.0, 0.0)
        for s in self.s_grid:
            BMQuery(self.N, s, 0.0)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentSpec":
        if not isinstance(obj, dict):
            raise StructuralError("experiment spec must be a JSON object")
        for key in ("model", "resolutions", "compacts"):
            if key not in obj:
                raise StructuralError(f"experiment spec: missing field {key!r}")
        known = {"model", "resolutions", "compacts", "N", "s_grid", "h", "pairs", "seed",
                 "exhaustive", "stability", "tol", "name"}
        unknown = set(obj) - known
        if unknown:
            raise StructuralError(f"experiment spec: unknown fields {sorted(unknown)}")
        return cls(
            model=ModelSpace.from_json(obj["model"]),
            resolutions=list(obj["resolutions"]),
            compacts=[CompactSpec.from_json(c) for c in obj["compacts"]],
            N=float(obj.get("N", 1.0)),
            s_grid=[float(s) for s in obj.get("s_grid", DEFAULT_S_GRID)],
            h=obj.get("h", "exact-4h"),
            pairs=obj.get("pairs"),
            seed=int(obj.get("seed", 0)),
            exhaustive=bool(obj.get("exhaustive", False)),
            stability=dict(obj.get("stability", {})),
            tol=float(obj.get("tol", TOL_REPORT)),
        )

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def slack(self, cover: float) -> float:
        return 4.0 * cover if self.h == "exact-4h" else float(self.h)

    def compact_masks(self, space, cells) -> dict:
        out = {}
        for i, c in enumerate(self.compacts):
            rng = np.random.default_rng([self.seed, i, *cells])
            out[c.name] = c.resolve(space, self.model, rng)
        return out


def _res_label(cells) -> str:
    return "x".join(str(c) for c in cells)


def _grid(spec: ExperimentSpec, cells):
    if math.prod(cells) > MAX_POINTS:
        raise CapacityError(f"resolution {_res_label(cells)} has {math.prod(cells)} points, "
                            f"above the {MAX_POINTS}-point cap")
    return discretize_grid(spec.model, cells)


@dataclass
class SweepResult:
    rows: list
    exhaustive: list = field(default_factory=list)
    tol: float = TOL_REPORT

    @property
    def failures(self) -> list:
        bad = [r for r in self.rows if r["status"] == VIOLATED]
        return bad + [r for r in self.exhaustive if r["status"] == VIOLATED]

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def min_deficit(self) -> float:
        live = [r["deficit"] for r in self.rows + self.exhaustive if r["status"] != VACUOUS]
        return min(live, default=math.inf)

    def to_json(self) -> dict:
        return {"ok": self.ok, "min_deficit": self.min_deficit, "rows": self.rows,
                "exhaustive": self.exhaustive}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows + self.exhaustive)
        return buf.getvalue()


def _row(label, h, eps, names, rep) -> dict:
    return {
        "resolution": label, "h": h, "eps": eps, "s": rep.query.s, "N": rep.query.N,
        "lhs": rep.lhs, "rhs": rep.rhs, "deficit": rep.deficit, "status": rep.status,
        "K": names[0], "L": names[1],
    }


def run_discretization_sweep(spec: ExperimentSpec, threads: int = 1) -> SweepResult:
    """Check BM(N, h) on each discretization for every compact pair and s.

    With the ``exact-4h`` policy, h is four times the covering radius of the
    grid. With ``spec.exhaustive`` set, grids of at most 16 points are also
    checked over all subset pairs.
    """
    jobs, exhaustive = [], []
    for cells in spec.resolutions:
        space, cover = _grid(spec, cells)
        h = spec.slack(cover)
        masks = spec.compact_masks(space, cells)
        label = _res_label(cells)
        for names in spec.pairs:
            for s in spec.s_grid:
                jobs.append((label, space, h, names, masks[names[0]], masks[names[1]], s))
        if spec.exhaustive and space.n <= 16:
            rep = bm_exhaustive_check(space, spec.N, h, spec.s_grid, spec.tol)
            exhaustive.append(_row(label, h, None, ("*exhaustive*", "*exhaustive*"), rep)
                              | {"K_indices": rep.K.to_json(), "L_indices": rep.L.to_json()})

    def evaluate(job):
        label, space, h, names, K, L, s = job
        return _row(label, h, None, names, bm_check(space, K, L, BMQuery(spec.N, s, h), spec.tol))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(evaluate, jobs))
    else:
        rows = [evaluate(j) for j in jobs]
    return SweepResult(rows, exhaustive, spec.tol)


# -- stability replay ---------------------------------------------------------


@dataclass
class Step:
    name: str
    lhs: float
    rhs: float
    holds: bool

    def to_json(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


@dataclass
class PairReplay:
    K: str
    L: str
    s: float
    masses: dict
    steps: list
    vacuous: bool = False

    @property
    def ok(self) -> bool:
        return all(st.holds for st in self.steps)

    def to_json(self) -> dict:
        return {"K": self.K, "L": self.L, "s": self.s, "vacuous": self.vacuous, "ok": self.ok,
                "masses": self.masses, "steps": [st.to_json() for st in self.steps]}


@dataclass
class StabilityReport:
    coarse: str
    fine: str
    h_coarse: float
    h: float
    delta: float
    eps: float
    slack: float
    N: float
    pairs: list

    @property
    def failures(self) -> list:
        return [(p.K, p.L, p.s, st.name) for p in self.pairs for st in p.steps if not st.holds]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"ok": self.ok, "coarse": self.coarse, "fine": self.fine,
                "h_coarse": self.h_coarse, "h": self.h, "delta": self.delta, "eps": self.eps,
                "slack": self.slack, "N": self.N, "pairs": [p.to_json() for p in self.pairs]}

    def rows(self) -> list:
        out = []
        for p in self.pairs:
            final = next((st for st in p.steps if st.name == "chained_bound"), None)
            if final is None:
                continue
            out.append({"resolution": f"{self.coarse}/{self.fine}", "h": self.h, "eps": self.eps,
                        "s": p.s, "N": self.N, "lhs": final.lhs, "rhs": final.rhs,
                        "deficit": final.lhs - final.rhs, "status": "ok" if p.ok else "failed",
                        "K": p.K, "L": p.L})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()


def _root(x, N):
    return 0.0 if x <= 0 else x ** (1.0 / N)


def run_stability_replay(spec: ExperimentSpec, coarse_res=None, fine_res=None,
                         eps: Union[str, float, None] = None) -> StabilityReport:
    """Replay the transfer argument of the stability theorem on a nested grid pair.

    The coarse grid plays the approximating space and the fine grid the limit
    space; they are coupled by sending each fine point to its cell center, and
    ``delta`` is the cost of that coupling. Compacts live on the fine grid.
    For each pair and each s the replay transfers both compacts to the coarse
    grid, takes their coarse intermediate set with slack ``h``, transfers it
    back, and checks each inequality of the argument separately.
    """
    cfg = spec.stability
    coarse_res = coarse_res if coarse_res is not None else cfg.get("coarse", spec.resolutions[0])
    fine_res = fine_res if fine_res is not None else cfg.get("fine", spec.resolutions[-1])
    eps = eps if eps is not None else cfg.get("eps", "sqrt-delta")
    cc, fc = _cells(spec.model, coarse_res), _cells(spec.model, fine_res)
    for cells in (cc, fc):
        if math.prod(cells) > MAX_POINTS:
            raise CapacityError(f"resolution {_res_label(cells)} has {math.prod(cells)} points, "
                                f"above the {MAX_POINTS}-point cap")
    link = refine_link(spec.model, cc, fc)
    coarse, fine = link.coarse, link.fine
    q = natural_discretization_coupling(link)
    cross = CrossDistance.from_link(link)
    back = cross.T
    delta = coupling_cost(q, cross)
    if eps == "sqrt-delta":
        eps = math.sqrt(delta)
    eps = float(eps)
    if eps > 0:
        slack = delta ** 2 / eps ** 2
    elif delta == 0:
        slack = 0.0
    else:
        raise ValueError("eps must be positive when the coupling cost is positive")
    h = spec.slack(link.h_coarse)
    tol = spec.tol
    masks = spec.compact_masks(fine, fc)
    N = spec.N

    def far(coupling_q, crossd, C):
        if eps > 0:
            return markov_mass_bound(coupling_q, crossd, C, eps)
        near = transfer_set(crossd, C, eps)
        return float(coupling_q.q[np.ix_(~near.membership, C.membership)].sum()), 0.0

    pairs = []
    for names in spec.pairs:
        C0, C1 = masks[names[0]], masks[names[1]]
        if not C0 or not C1:
            for s in spec.s_grid:
                pairs.append(PairReplay(names[0], names[1], float(s), {}, [], vacuous=True))
            continue
        m0, m1 = mass(fine, C0), mass(fine, C1)
        T0, T1 = transfer_set(cross, C0, eps), transfer_set(cross, C1, eps)
        mT0, mT1 = mass(coarse, T0), mass(coarse, T1)
        far0, bound0 = far(q, cross, C0)
        far1, bound1 = far(q, cross, C1)
        for s in spec.s_grid:
            s = float(s)
            Cn = intermediate_set(coarse, T0, T1, s, h)
            mCn = mass(coarse, Cn)
            B = transfer_set(back, Cn, eps)
            mB = mass(fine, B)
            farB, boundB = far(q.T, back, Cn) if Cn else (0.0, slack)
            lhs_n = _root(mCn, N)
            rhs_n = (1 - s) * _root(mT0, N) + s * _root(mT1, N)
            target = (1 - s) * _root(m0, N) + s * _root(m1, N)
            wide = intermediate_set(fine, C0, C1, s, h + 4 * eps)
            inside = B.issubset(wide)
            steps = [
                Step("markov_C0", far0, bound0, far0 <= bound0 + tol),
                Step("markov_C1", far1, bound1, far1 <= bound1 + tol),
                Step("transfer_C0", mT0, m0 - slack, mT0 >= m0 - slack - tol),
                Step("transfer_C1", mT1, m1 - slack, mT1 >= m1 - slack - tol),
                Step("coarse_bm", lhs_n, rhs_n, lhs_n >= rhs_n - tol),
                Step("markov_back", farB, boundB, farB <= boundB + tol),
                Step("back_transfer", mB, mCn - slack, mB >= mCn - slack - tol),
                Step("chained_bound", _root(mB, N), target - 2 * _root(slack, N),
                     _root(mB, N) >= target - 2 * _root(slack, N) - tol),
                Step("inclusion", float(len(B - wide)), 0.0, inside),
            ]
            masses = {"C0": m0, "C1": m1, "C0_transfer": mT0, "C1_transfer": mT1,
                      "coarse_intermediate": mCn, "back_transfer": mB}
            pairs.append(PairReplay(names[0], names[1], s, masses, steps))
    return StabilityReport(_res_label(cc), _res_label(fc), link.h_coarse, h, delta, eps,
                           slack, N, pairs)
