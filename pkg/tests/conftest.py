import numpy as np
import pytest

from approxbm import FiniteMetricMeasureSpace, path_space


def random_space(rng, n, metric="l2"):
    pts = rng.random((n, 2))
    return FiniteMetricMeasureSpace.from_coords(pts, rng.random(n) + 0.05, metric=metric)


def random_mask(space, rng, p=0.3, nonempty=True):
    keep = rng.random(space.n) < p
    if nonempty and not keep.any():
        keep[rng.integers(space.n)] = True
    return space.mask(keep)


def random_coupling(rng, wa, wb, iters=3000):
    """Matrix with marginals `wa`, `wb` by alternating row and column scaling."""
    q = rng.random((len(wa), len(wb))) ** 4
    for _ in range(iters):
        q *= (wa / q.sum(axis=1))[:, None]
        q *= (wb / q.sum(axis=0))[None, :]
    return q


def grid_1d(n, side=1.0):
    x = side * (np.arange(n) + 0.5) / n
    return FiniteMetricMeasureSpace.from_coords(x, np.full(n, side / n), metric="l2")


@pytest.fixture
def two_point():
    return FiniteMetricMeasureSpace([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5], labels=["a", "b"])


@pytest.fixture
def path3():
    return path_space(3)


@pytest.fixture
def cycle4():
    # a-b-c-d-a with unit edges
    D = [[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]]
    return FiniteMetricMeasureSpace(D, [0.25] * 4, labels=list("abcd"))
