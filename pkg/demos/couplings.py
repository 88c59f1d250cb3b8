"""
Couplings between a coarse and a fine grid
==========================================

The natural coupling moves mass at most the coarse covering radius. The
optimal coupling can only do better, and Markov's inequality bounds how much
mass travels farther than eps.
"""
from approxbm import (
    CrossDistance,
    ModelSpace,
    coupling_cost,
    markov_mass_bound,
    natural_discretization_coupling,
    ot_coupling,
    refine_link,
)

link = refine_link(ModelSpace.box([1.0, 1.0]), (4, 4), (12, 12))
cross = CrossDistance.from_link(link)
natural = natural_discretization_coupling(link)
cost = coupling_cost(natural, cross)
_, best = ot_coupling(link.coarse, link.fine, cross)
print(f"covering radius {link.h_coarse:.4f}, natural cost {cost:.4f}, optimal cost {best:.4f}")

C = link.fine.subset(range(0, link.fine.n, 7))
for eps in (0.05, 0.1, 0.2, 0.4):
    far, bound = markov_mass_bound(natural, cross, C, eps)
    print(f"eps={eps:<4} mass arriving from farther than eps: {far:.4f} <= {min(bound, 1):.4f}")
