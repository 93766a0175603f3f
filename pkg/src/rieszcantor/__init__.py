"""Riesz transforms, corona decompositions and capacities on Cantor sets.

The package builds uniformly disconnected Cantor trees with measures on them
(:mod:`.geometry`, :mod:`.measure`), evaluates fractional Riesz transforms with
a direct sum or a Cartesian treecode (:mod:`.riesz`), runs the stopping-time
decomposition of the cube family (:mod:`.corona`) and compares Riesz energies,
Wolff energies and capacity proxies (:mod:`.capacity`).  :mod:`.pipeline` and
:mod:`.cli` tie these into batteries of experiments.
"""

from .capacity import (BatteryEntry, CapacityReport, WolffParams, capacity_nonlinear, capacity_riesz,
                       comparability_report, growth_scan, two_cube_lower_bound_check, wolff_energy,
                       wolff_potential, wolff_potentials)
from .config import ExperimentConfig, load_config
from .corona import (CoronaDecomposition, CoronaParams, build_maximal_trees, check_corona_invariants,
                     check_tractable, classify_simple_tree, corona_decompose, tree_statistics)
from .errors import RieszCantorError
from .geometry import CantorSpec, CantorTree, build_cantor, transform_tree, validate_tree
from .measure import (DyadicMeasure, MassRule, PointCloud, assign_measure, discretize, is_p_doubling,
                      p_coefficient, q_coefficient, sigma, theta, theta_dyadic)
from .riesz import (KernelParams, leaf_field, martingale_decompose, riesz_energy, riesz_field, riesz_mean,
                    riesz_means)

__version__ = "0.1.0"

__all__ = [
    "BatteryEntry", "CapacityReport", "WolffParams", "capacity_nonlinear", "capacity_riesz",
    "comparability_report", "growth_scan", "two_cube_lower_bound_check", "wolff_energy", "wolff_potential",
    "wolff_potentials", "ExperimentConfig", "load_config", "CoronaDecomposition", "CoronaParams",
    "build_maximal_trees", "check_corona_invariants", "check_tractable", "classify_simple_tree",
    "corona_decompose", "tree_statistics", "RieszCantorError", "CantorSpec", "CantorTree", "build_cantor",
    "transform_tree", "validate_tree", "DyadicMeasure", "MassRule", "PointCloud", "assign_measure",
    "discretize", "is_p_doubling", "p_coefficient", "q_coefficient", "sigma", "theta", "theta_dyadic",
    "KernelParams", "leaf_field", "martingale_decompose", "riesz_energy", "riesz_field", "riesz_mean",
    "riesz_means",
]
