"""Weighted regularized least squares and its distributed variant for
scattered noisy data on spheres."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .errors import (DwrlsError, InputError, NoPositiveRule, NumericalError,  # noqa: E402
                     ShardFailure, SolveError)

__all__ = [
    "__version__",
    "BACKEND",
    "DwrlsError",
    "InputError",
    "NoPositiveRule",
    "NumericalError",
    "ShardFailure",
    "SolveError",
]
