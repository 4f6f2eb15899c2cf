"""CART regression trees and numerical checks of the conditions behind their rates."""
from ._accel import HAS_NUMBA
from .cart import Rectangle, RegressionTree, SplitStatistics, best_empirical_split, fit_cart, l2_error
from .errors import CartlabError, ConfigurationError, DomainError

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "CartlabError",
    "ConfigurationError",
    "DomainError",
    "Rectangle",
    "RegressionTree",
    "SplitStatistics",
    "best_empirical_split",
    "fit_cart",
    "l2_error",
    "__version__",
]
