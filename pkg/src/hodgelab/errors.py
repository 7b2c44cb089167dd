class HodgeLabError(Exception):
    """Base class for all errors raised by hodgelab."""

    category = "error"


class ValidationError(HodgeLabError, ValueError):
    category = "validation"


class ConvergenceError(HodgeLabError):
    category = "convergence"


class SpectralGapError(HodgeLabError):
    """Raised when a zero cluster cannot be separated from the positive spectrum."""

    category = "gap"

    def __init__(self, message, below=None, above=None):
        super().__init__(message)
        self.below = below
        self.above = above


class RankAmbiguityError(SpectralGapError):
    category = "rank"
