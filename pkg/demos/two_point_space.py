"""
Why the slack h is needed
=========================

A space with two points at distance 1 has no midpoints, so the exact
intermediate set between the two singletons is empty and Brunn-Minkowski
fails. Allowing an additive slack h repairs it.
"""
from approxbm import BMQuery, FiniteMetricMeasureSpace, bm_check, bm_exhaustive_check

space = FiniteMetricMeasureSpace([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5], labels=["a", "b"])
a, b = space.subset([0]), space.subset([1])

# exact midpoints: nothing lies halfway between a and b
rep = bm_check(space, a, b, BMQuery(N=1, s=0.5, h=0.0))
print(f"h=0    lhs={rep.lhs} rhs={rep.rhs} deficit={rep.deficit} -> {rep.status}")

# half the distance as slack puts both points in the midpoint set
rep = bm_check(space, a, b, BMQuery(N=1, s=0.5, h=0.5))
print(f"h=0.5  lhs={rep.lhs} rhs={rep.rhs} deficit={rep.deficit} -> {rep.status}")

# how much slack each s needs, over every pair of nonempty subsets
for h in (0.0, 0.5, 0.75, 1.0):
    worst = bm_exhaustive_check(space, 1, h)
    print(f"h={h:<5} worst deficit over all pairs and s: {worst.deficit:+.3f} "
          f"(K={worst.K.to_json()}, L={worst.L.to_json()}, s={worst.query.s})")
