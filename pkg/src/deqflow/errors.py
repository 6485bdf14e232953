"""Exception hierarchy shared by all deqflow modules."""


class DEQError(Exception):
    """Base class for all deqflow errors."""


class DimensionError(DEQError, ValueError):
    """Input shapes do not agree."""


class SingularityError(DEQError, ArithmeticError):
    """A denominator ``1 - theta2`` (or ``1 - theta2 * sigma'``) vanished."""


class ContractionError(DEQError, ValueError):
    """The fixed-point map is not a contraction (``L * |theta2| >= 1``)."""


class NoConvergenceError(DEQError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class BracketError(DEQError, ValueError):
    """Bracket endpoints do not straddle a root."""


class IntegrationError(DEQError, FloatingPointError):
    """A non-finite value appeared while integrating or descending."""


class RankError(DEQError, ArithmeticError):
    """The second-moment matrix is singular where positive definiteness is required."""


class SolveError(DEQError):
    """Per-sample solver failure, annotated with the offending sample index."""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"sample {index}: {cause}")
