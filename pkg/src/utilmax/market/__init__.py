"""Finite scenario-tree markets and their martingale measures."""
from .entropy import generalized_entropy, kl_divergence, mixture_bound
from .levy import LevyReport, levy_moment_check
from .localize import (LocalizationCertificate, LocalizationError, compound_poisson_paths,
                       integral_maximal, level_sets, sigma_localize)
from .polytope import (MartingalePolytope, MeasureQ, MembershipReport, PolytopeOverflow,
                       check_simple_martingale, constraint_matrix, is_martingale_measure,
                       martingale_polytope, random_measures)
from .tree import (MarketError, ScenarioTree, binomial, maximal_process, random_tree, trinomial,
                   wealth_process)

__all__ = [
    "ScenarioTree", "MarketError", "wealth_process", "maximal_process", "binomial", "trinomial",
    "random_tree", "MeasureQ", "MartingalePolytope", "MembershipReport", "PolytopeOverflow",
    "martingale_polytope", "constraint_matrix", "is_martingale_measure",
    "check_simple_martingale", "random_measures", "generalized_entropy", "kl_divergence",
    "mixture_bound", "sigma_localize", "LocalizationCertificate", "LocalizationError",
    "level_sets", "compound_poisson_paths", "integral_maximal", "levy_moment_check",
    "LevyReport",
]
