"""Numerical laboratory for form Laplacians on metric graphs, cones and simplicial meshes."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    HodgeLabError,
    RankAmbiguityError,
    SpectralGapError,
    ValidationError,
)
from .spectral import SpectralResult, solve_pencil  # noqa: E402

__all__ = [
    "ConvergenceError",
    "HodgeLabError",
    "RankAmbiguityError",
    "SpectralGapError",
    "SpectralResult",
    "ValidationError",
    "solve_pencil",
]
