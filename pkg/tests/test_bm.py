import itertools
import json

import numpy as np
import pytest

from approxbm import (
    BMQuery,
    CapacityError,
    FiniteMetricMeasureSpace,
    SearchConfig,
    bm_check,
    bm_exhaustive_check,
    bm_mult_check,
    bm_search_violations,
    cycle_space,
    intermediate_set_bruteforce,
    mass,
)

from conftest import grid_1d, random_mask, random_space


def naive_worst(space, N, h, s_grid):
    """Direct enumeration of every nonempty subset pair with the brute-force set."""
    n = space.n
    subsets = [space.mask([(b >> i) & 1 for i in range(n)]) for b in range(1, 1 << n)]
    best = np.inf
    for s in s_grid:
        for K in subsets:
            for L in subsets:
                C = intermediate_set_bruteforce(space, K, L, s, h)
                lhs = mass(space, C) ** (1 / N) if len(C) else 0.0
                rhs = (1 - s) * mass(space, K) ** (1 / N) + s * mass(space, L) ** (1 / N)
                best = min(best, lhs - rhs)
    return best


def eleven_point_grid():
    return FiniteMetricMeasureSpace.from_coords(np.arange(11) / 10, np.full(11, 0.1))


def test_full_pair_has_zero_deficit():
    rng = np.random.default_rng(0)
    space = random_space(rng, 12)
    for s, N in itertools.product((0, 0.4, 1), (1, 2, 3.5)):
        rep = bm_check(space, space.full(), space.full(), BMQuery(N, s, 0))
        assert rep.deficit == pytest.approx(0, abs=1e-15)
        assert rep.status == "satisfied"


def test_two_point_space(two_point):
    a, b = two_point.subset([0]), two_point.subset([1])
    rep = bm_check(two_point, a, b, BMQuery(1, 0.5, 0))
    assert (rep.lhs, rep.rhs, rep.deficit, rep.status) == (0.0, 0.5, -0.5, "violated")
    rep = bm_check(two_point, a, b, BMQuery(1, 0.5, 0.5))
    assert rep.witness == two_point.full()
    assert (rep.lhs, rep.rhs, rep.status) == (1.0, 0.5, "satisfied")


def test_two_point_slack_depends_on_s(two_point):
    # h = 0.5 covers s = 0.5 only; at s = 0.4 the pair ({a}, {a, b}) keeps C = {a}
    assert bm_exhaustive_check(two_point, 1, 0.5, [0.5]).deficit == 0
    rep = bm_exhaustive_check(two_point, 1, 0.5, [0.4])
    assert (rep.K.indices.tolist(), rep.L.indices.tolist()) == ([0], [0, 1])
    assert rep.deficit == pytest.approx(-0.2, abs=1e-15)
    # the diameter is enough for every s
    assert bm_exhaustive_check(two_point, 1, 1.0).deficit >= 0


def test_empty_input_is_vacuous(two_point):
    rep = bm_check(two_point, two_point.empty(), two_point.full(), BMQuery(1, 0.5, 0))
    assert rep.status == "vacuous"
    assert bm_mult_check(two_point, two_point.full(), two_point.empty(), 0.5, 0).status == "vacuous"


def test_eleven_point_grid():
    g = eleven_point_grid()
    K, L = g.subset(range(4)), g.subset(range(7, 11))
    oracle = intermediate_set_bruteforce(g, K, L, 0.5, 0.05)
    rep = bm_check(g, K, L, BMQuery(1, 0.5, 0.05))
    assert rep.witness == oracle
    assert rep.lhs == pytest.approx(mass(g, oracle), abs=1e-15)
    assert rep.rhs == pytest.approx(0.4, abs=1e-15)
    assert rep.deficit >= 0


def test_multiplicative():
    g = eleven_point_grid()
    full = bm_mult_check(g, g.full(), g.full(), 0.3, 0)
    assert full.deficit == pytest.approx(0, abs=1e-15)
    K, L = g.subset(range(4)), g.subset(range(7, 11))
    rep = bm_mult_check(g, K, L, 0.5, 0.05)
    assert rep.rhs == pytest.approx(0.4, abs=1e-15)
    assert rep.deficit >= 0
    assert rep.kind == "multiplicative" and rep.to_json()["N"] is None


def test_multiplicative_two_point(two_point):
    rep = bm_mult_check(two_point, two_point.subset([0]), two_point.subset([1]), 0.5, 0)
    assert (rep.lhs, rep.status) == (0.0, "violated")
    assert rep.rhs == pytest.approx(0.5, abs=1e-15)


def test_report_json(two_point):
    rep = bm_check(two_point, two_point.subset([0]), two_point.subset([1]), BMQuery(1, 0.5, 0.5))
    out = json.loads(json.dumps(rep.to_json()))
    assert set(out) >= {"lhs", "rhs", "deficit", "status", "s", "h", "N",
                        "K_indices", "L_indices", "witness_indices"}
    assert out["K_indices"] == [0] and out["witness_indices"] == [0, 1]


def test_swap_symmetry_of_reports():
    rng = np.random.default_rng(5)
    for _ in range(50):
        space = random_space(rng, 20)
        K, L = random_mask(space, rng), random_mask(space, rng)
        s, h, N = rng.random(), rng.choice([0, 0.05, 0.2]), rng.choice([1, 2, 3])
        a = bm_check(space, K, L, BMQuery(N, s, h))
        b = bm_check(space, L, K, BMQuery(N, 1 - s, h))
        assert a.lhs == b.lhs
        assert a.rhs == pytest.approx(b.rhs, abs=1e-14)


def test_deficit_monotone_in_h():
    rng = np.random.default_rng(6)
    for _ in range(100):
        space = random_space(rng, 20)
        K, L = random_mask(space, rng), random_mask(space, rng)
        s, N = rng.random(), rng.choice([1, 2])
        h1, h2 = sorted(rng.random(2) * 0.3)
        d1 = bm_check(space, K, L, BMQuery(N, s, h1)).deficit
        d2 = bm_check(space, K, L, BMQuery(N, s, h2)).deficit
        assert d1 <= d2


def test_multiplicative_below_dimensional_on_normalized_spaces():
    # for masses a, b <= 1: a^(1-s) b^s <= ((1-s) a^(1/N) + s b^(1/N))^N
    rng = np.random.default_rng(7)
    for _ in range(100):
        space = random_space(rng, 15)
        space = FiniteMetricMeasureSpace(space.dist, space.weights / space.total_mass)
        K, L = random_mask(space, rng), random_mask(space, rng)
        s, N = rng.random(), int(rng.integers(1, 4))
        dim = bm_check(space, K, L, BMQuery(N, s, 0.05))
        mult = bm_mult_check(space, K, L, s, 0.05)
        assert mult.rhs <= dim.rhs**N + 1e-12
        assert mult.lhs == pytest.approx(dim.lhs**N, rel=1e-12, abs=1e-15)


def test_parent_mismatch(two_point):
    other = FiniteMetricMeasureSpace(two_point.dist, two_point.weights)
    with pytest.raises(ValueError):
        bm_check(two_point, other.full(), two_point.full(), BMQuery(1, 0.5, 0))


# -- exhaustive ------------------------------------------------------------------


def test_exhaustive_two_point(two_point):
    rep = bm_exhaustive_check(two_point, 1, 0, [0.5])
    assert rep.deficit == -0.5
    assert {tuple(rep.K.indices), tuple(rep.L.indices)} == {(0,), (1,)}


def test_exhaustive_path(path3):
    single = bm_check(path3, path3.subset([0]), path3.subset([2]), BMQuery(1, 0.5, 0))
    assert (single.lhs, single.rhs, single.deficit) == (1.0, 1.0, 0.0)
    no_mid = bm_check(path3, path3.subset([0]), path3.subset([1]), BMQuery(1, 0.5, 0))
    assert no_mid.deficit < 0
    rep = bm_exhaustive_check(path3, 1, 0, [0.5])
    assert rep.deficit == pytest.approx(naive_worst(path3, 1, 0, [0.5]), abs=1e-15)
    assert rep.deficit <= no_mid.deficit


def test_exhaustive_cycle8():
    # frozen from naive enumeration of all 255 x 255 pairs and the default s grid
    rep = bm_exhaustive_check(cycle_space(8), 1, 0)
    assert rep.deficit == pytest.approx(-0.8, abs=1e-12)
    assert rep.query.s == pytest.approx(0.1)


@pytest.mark.parametrize("seed", range(12))
def test_exhaustive_matches_naive(seed):
    rng = np.random.default_rng(seed)
    space = random_space(rng, int(rng.integers(2, 5)))
    N = float(rng.choice([1, 2, 2.5]))
    h = float(rng.choice([0, 0.05, 0.2]))
    s_grid = [0, 0.3, 0.5, 1]
    assert bm_exhaustive_check(space, N, h, s_grid).deficit == pytest.approx(
        naive_worst(space, N, h, s_grid), abs=1e-12
    )


def test_exhaustive_capacity():
    with pytest.raises(CapacityError):
        bm_exhaustive_check(grid_1d(17), 1, 0)


# -- search ----------------------------------------------------------------------


def test_search_two_point(two_point):
    for seed in range(3):
        reps = bm_search_violations(two_point, 1, 0, SearchConfig(seed=seed, iterations=1))
        assert reps[0].deficit == -0.5


def test_search_grid_respects_theorem():
    g = grid_1d(16)
    h = 4 * (0.5 / 16)
    reps = bm_search_violations(g, 1, h, SearchConfig(seed=1, iterations=500))
    assert reps and min(r.deficit for r in reps) >= -1e-12
    assert bm_exhaustive_check(g, 1, h, [0.25, 0.5]).deficit >= -1e-12


def test_search_is_deterministic():
    rng = np.random.default_rng(9)
    space = random_space(rng, 14)
    cfg = SearchConfig(seed=42, iterations=60)
    a = [r.to_json() for r in bm_search_violations(space, 2, 0.02, cfg)]
    b = [r.to_json() for r in bm_search_violations(space, 2, 0.02, cfg)]
    assert a == b
    assert [r["deficit"] for r in a] == sorted(r["deficit"] for r in a)
    assert all(r["status"] != "vacuous" for r in a)


def test_search_never_beats_exhaustive():
    rng = np.random.default_rng(10)
    for _ in range(5):
        space = random_space(rng, int(rng.integers(3, 9)))
        s_grid = [0.25, 0.5]
        exact = bm_exhaustive_check(space, 1, 0.05, s_grid).deficit
        reps = bm_search_violations(space, 1, 0.05,
                                    SearchConfig(seed=0, iterations=80, s_grid=s_grid))
        assert reps[0].deficit >= exact - 1e-12


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(iterations=0)
    with pytest.raises(ValueError):
        SearchConfig(s_grid=[])
    with pytest.raises(ValueError):
        SearchConfig(s_grid=[1.5])
    with pytest.raises(ValueError):
        SearchConfig(proposals=["bogus"])


@pytest.mark.parametrize("proposals", [("random-union",), ("metric-ball",),
                                       ("metric-ball", "dilation-perturbation")])
def test_search_proposal_kinds(proposals):
    rng = np.random.default_rng(12)
    space = random_space(rng, 12)
    cfg = SearchConfig(seed=3, iterations=30, proposals=proposals, max_size=4)
    reps = bm_search_violations(space, 1, 0.0, cfg)
    assert reps
    assert all(len(r.K) <= 4 and len(r.L) <= 4 for r in reps)
