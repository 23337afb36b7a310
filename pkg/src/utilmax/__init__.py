"""Expected-utility portfolio duality on finite scenario trees.

Subpackages: :mod:`utilmax.utility` (utilities and conjugates),
:mod:`utilmax.orlicz` (Young functions and Luxemburg norms),
:mod:`utilmax.market` (trees, martingale polytopes, entropy, localization),
:mod:`utilmax.solvers` (primal, dual and complete-market solvers),
:mod:`utilmax.verify` (property checks) and :mod:`utilmax.cli`.
"""
from .kernels import BACKEND
from .utility import UtilityFunction, parse_utility

__version__ = "0.1.0"

__all__ = ["BACKEND", "UtilityFunction", "parse_utility", "__version__"]
