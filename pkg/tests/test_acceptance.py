"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured quantity
next to the tolerance it is held to.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from approxbm import (
    BMQuery,
    Coupling,
    CrossDistance,
    Density,
    ExperimentSpec,
    FiniteMetricMeasureSpace,
    ModelSpace,
    SearchConfig,
    bm_check,
    bm_exhaustive_check,
    bm_search_violations,
    coupling_cost,
    dilate_mass_lower_bound,
    intermediate_set,
    intermediate_set_bruteforce,
    markov_mass_bound,
    natural_discretization_coupling,
    ot_coupling,
    refine_link,
    restrict_mass_lower_bound,
    run_discretization_sweep,
    run_stability_replay,
)
from approxbm.cli import main

from conftest import random_coupling, random_mask, random_space

DATA = Path(__file__).resolve().parents[1] / "demos" / "data"
TOL = 1e-12

S_VALUES = (0.0, 0.25, 0.5, 0.75, 1.0)
H_VALUES = (0.0, 0.05, 0.2)

LINKS = [
    (ModelSpace.box([1.0]), 4, 16),
    (ModelSpace.box([1.0], Density("exponential", c=(1.0,), lam=(2.0,))), 8, 32),
    (ModelSpace.box([2.0], Density("affine", a=(0.5,), b=(1.0,)), metric="l1"), 3, 12),
    (ModelSpace.box([1.0, 1.0]), (4, 4), (8, 8)),
    (ModelSpace.box([1.0, 0.5], metric="linf"), (2, 4), (6, 8)),
    (ModelSpace.circle(1.0), 6, 24),
]
EXTRA_LINKS = [
    (ModelSpace.box([1.0, 1.0, 1.0]), (2, 2, 2), (4, 4, 4)),
    (ModelSpace.box([1.0, 1.0], metric="l1"), (3, 3), (9, 9)),
]


def verdict(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
    assert ok, detail


def spec(name, **kw):
    obj = json.loads((DATA / name).read_text())
    obj.update(kw)
    return ExperimentSpec.from_json(obj)


def test_criterion_1_oracle_equivalence(capsys):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    mismatches = cases = 0
    for i in range(100):
        n = 200 if i == 0 else int(rng.integers(2, 201))
        space = random_space(rng, n)
        p = rng.uniform(0.05, 0.25)
        K, L = random_mask(space, rng, p), random_mask(space, rng, p)
        for s in S_VALUES:
            for h in H_VALUES:
                cases += 1
                if intermediate_set(space, K, L, s, h) != intermediate_set_bruteforce(space, K, L, s, h):
                    mismatches += 1
    elapsed = time.perf_counter() - t0
    verdict(capsys, 1, "oracle equivalence", mismatches == 0 and elapsed < 30,
            f"{mismatches}/{cases} mismatches, {elapsed:.1f}s (limit 30s)")


def test_criterion_2_definition_sanity(capsys):
    rng = np.random.default_rng(2)
    failures = {"endpoints": 0, "symmetry": 0, "monotone_h": 0, "monotone_KL": 0}
    for _ in range(100):
        space = random_space(rng, int(rng.integers(2, 60)))
        K, L = random_mask(space, rng), random_mask(space, rng)
        # dyadic s so that 1 - (1 - s) == s exactly
        s, h = int(rng.integers(0, 65)) / 64, float(rng.uniform(0, 0.3))

        if intermediate_set(space, K, L, 0, 0) != K or intermediate_set(space, K, L, 1, 0) != L:
            failures["endpoints"] += 1

        if intermediate_set(space, K, L, s, h) != intermediate_set(space, L, K, 1 - s, h):
            failures["symmetry"] += 1

        h2 = h + float(rng.uniform(0, 0.3))
        if not intermediate_set(space, K, L, s, h).issubset(intermediate_set(space, K, L, s, h2)):
            failures["monotone_h"] += 1

        K2, L2 = K | random_mask(space, rng), L | random_mask(space, rng)
        if not intermediate_set(space, K, L, s, h).issubset(intermediate_set(space, K2, L2, s, h)):
            failures["monotone_KL"] += 1
    total = sum(failures.values())
    verdict(capsys, 2, "definition sanity", total == 0,
            ", ".join(f"{k} {v}/100" for k, v in failures.items()) + " failures")


def test_criterion_3_two_point_space(capsys):
    space = FiniteMetricMeasureSpace([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5])
    rep = bm_check(space, space.subset([0]), space.subset([1]), BMQuery(1, 0.5, 0))
    # BM(1, 0.5) at the stated s = 0.5, over all nine nonempty subset pairs
    worst = bm_exhaustive_check(space, 1, 0.5, s_grid=[0.5])
    # for information: other values of s need a larger slack
    full = bm_exhaustive_check(space, 1, 0.5)
    ok = (abs(rep.deficit + 0.5) <= 1e-15 and rep.status == "violated"
          and worst.status == "satisfied" and abs(worst.deficit) <= 1e-15)
    verdict(capsys, 3, "two-point space", ok,
            f"h=0 deficit {rep.deficit!r} (expect -0.5), h=0.5 worst deficit at s=0.5 "
            f"{worst.deficit!r} (expect 0); full s-grid worst {full.deficit:.3f} at s={full.query.s}")


def test_criterion_4_discretization_sweeps(capsys):
    t0 = time.perf_counter()
    line = spec("interval_exp.json")
    square = spec("square_exp.json")
    results = [run_discretization_sweep(line), run_discretization_sweep(square)]
    elapsed = time.perf_counter() - t0
    worst = min(r.min_deficit for r in results)
    rows = sum(len(r.rows) for r in results)
    exhaustive = sum(len(r.exhaustive) for r in results)
    kinds = {c.type for c in line.compacts} | {c.type for c in square.compacts}
    ok = (worst >= -TOL and all(r.ok for r in results) and exhaustive == 4
          and {"slab", "ball", "rect", "random"} <= kinds and elapsed < 120)
    verdict(capsys, 4, "BM(N,4h) on grids", ok,
            f"{rows} sweep rows + {exhaustive} exhaustive grids, min deficit {worst:.3e} "
            f"(limit -1e-12), {elapsed:.1f}s (limit 120s)")


def test_criterion_5_dilation_mass_bounds(capsys):
    violations = checks = 0
    for model, coarse, fine in LINKS:
        link = refine_link(model, coarse, fine)
        rng = np.random.default_rng(list(np.atleast_1d(coarse)) + list(np.atleast_1d(fine)))
        for _ in range(200):
            H = link.coarse.mask(rng.random(link.coarse.n) < rng.random())
            big, small = dilate_mass_lower_bound(link, H)
            violations += big < small - TOL
            A = link.fine.mask(rng.random(link.fine.n) < rng.random())
            big, small = restrict_mass_lower_bound(link, A)
            violations += big < small - TOL
            checks += 2
    verdict(capsys, 5, "dilation mass lemma", violations == 0,
            f"{violations}/{checks} violations over {len(LINKS)} links at 1e-12")


def test_criterion_6_coupling_bounds(capsys):
    natural_bad = ot_bad = 0
    for model, coarse, fine in LINKS + EXTRA_LINKS:
        link = refine_link(model, coarse, fine)
        cross = CrossDistance.from_link(link)
        natural = coupling_cost(natural_discretization_coupling(link), cross)
        natural_bad += natural > link.h_coarse + TOL
        _, best = ot_coupling(link.coarse, link.fine, cross)
        ot_bad += best > natural + TOL

    rng = np.random.default_rng(6)
    markov_bad = 0
    for _ in range(100):
        n, m = rng.integers(2, 15, size=2)
        a, b = random_space(rng, n), random_space(rng, m)
        b = FiniteMetricMeasureSpace(b.dist, b.weights * a.total_mass / b.total_mass)
        q = Coupling(random_coupling(rng, a.weights, b.weights, 500), a, b, tol=1e-6)
        cross = CrossDistance(rng.random((n, m)), a, b)
        far, bound = markov_mass_bound(q, cross, random_mask(b, rng), float(rng.uniform(0.05, 1)))
        markov_bad += far > bound + TOL
    n_links = len(LINKS) + len(EXTRA_LINKS)
    verdict(capsys, 6, "coupling bounds", natural_bad + ot_bad + markov_bad == 0,
            f"natural > h_coarse {natural_bad}/{n_links}, ot > natural {ot_bad}/{n_links}, "
            f"Markov {markov_bad}/100 violations at 1e-12")


def test_criterion_7_stability_replay(capsys):
    t0 = time.perf_counter()
    reports = [run_stability_replay(spec("interval_exp.json")),
               run_stability_replay(spec("square_exp.json"))]
    elapsed = time.perf_counter() - t0
    failures = sum(len(r.failures) for r in reports)
    steps = sum(len(p.steps) for r in reports for p in r.pairs)
    live = sum(not p.vacuous for r in reports for p in r.pairs)
    ok = failures == 0 and live > 0 and elapsed < 120
    verdict(capsys, 7, "stability replay", ok,
            f"{failures}/{steps} step failures over {live} live pairs, "
            f"{elapsed:.1f}s (limit 120s)")


def test_criterion_8_determinism(capsys, tmp_path):
    rng = np.random.default_rng(8)
    space = random_space(rng, 30)
    cfg = SearchConfig(seed=17, iterations=150)
    search = [json.dumps([r.to_json() for r in bm_search_violations(space, 2, 0.05, cfg)])
              for _ in range(2)]

    sweeps = [json.dumps(run_discretization_sweep(spec("interval_exp.json"), threads=t).to_json())
              for t in (1, 1, 3)]

    outputs = []
    space_file = tmp_path / "space.json"
    space.save(space_file)
    for i in range(2):
        target = tmp_path / f"search{i}.json"
        main(["bm-search", str(space_file), "--N", "2", "--h", "0.05", "--seed", "5",
              "--out", str(target)])
        outputs.append(target.read_bytes())
    ok = search[0] == search[1] and len(set(sweeps)) == 1 and outputs[0] == outputs[1]
    verdict(capsys, 8, "determinism", ok,
            f"search identical {search[0] == search[1]}, sweeps identical "
            f"{len(set(sweeps)) == 1} (threads 1,1,3), CLI output identical {outputs[0] == outputs[1]}")
