"""Approximate Brunn-Minkowski inequalities on finite metric measure spaces."""

from .bm import (
    BMReport,
    SearchConfig,
    bm_check,
    bm_exhaustive_check,
    bm_mult_check,
    bm_search_violations,
)
from .coupling import (
    Coupling,
    CrossDistance,
    coupling_cost,
    markov_mass_bound,
    natural_discretization_coupling,
    ot_coupling,
    transfer_mass_bound,
    transfer_set,
)
from .discretize import (
    Density,
    DiscretizationLink,
    ModelSpace,
    dilate_mass_lower_bound,
    discretize_grid,
    refine_link,
    restrict_mass_lower_bound,
)
from .harness import (
    CompactSpec,
    ExperimentSpec,
    StabilityReport,
    SweepResult,
    run_discretization_sweep,
    run_stability_replay,
)
from .intermediate import intermediate_set, intermediate_set_bruteforce
from .space import (
    BMQuery,
    CapabilityError,
    CapacityError,
    FiniteMetricMeasureSpace,
    StructuralError,
    SubsetMask,
    ValidationReport,
    cycle_space,
    dilate,
    mass,
    path_space,
    theta,
    validate_space,
)

__version__ = "0.1.0"
