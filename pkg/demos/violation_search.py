"""
Searching a sparse point cloud for violations
=============================================

Points scattered in the plane are far from geodesic, so BM fails for small
slack. The seeded search finds the offending subset pairs; growing h makes
them disappear.
"""
import numpy as np

from approxbm import FiniteMetricMeasureSpace, SearchConfig, bm_search_violations

rng = np.random.default_rng(0)
pts = rng.random((40, 2))
space = FiniteMetricMeasureSpace.from_coords(pts, np.full(40, 1 / 40))
cfg = SearchConfig(seed=1, iterations=300, top_k=3)

for h in (0.0, 0.05, 0.1, 0.2):
    reports = bm_search_violations(space, 2, h, cfg)
    worst = reports[0]
    print(f"h={h:<5} worst deficit {worst.deficit:+.4f} ({worst.status}) "
          f"|K|={len(worst.K)} |L|={len(worst.L)} s={worst.query.s}")
