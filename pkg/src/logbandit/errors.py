"""Exception types shared across the package."""


class LogBanditError(Exception):
    """Base class for package errors."""


class DimensionMismatch(LogBanditError):
    """Vector/matrix dimensions disagree."""


class Singular(LogBanditError):
    """A matrix that must be inverted is singular and no ridge was given."""


class RankDeficient(LogBanditError):
    """An arm collection does not span the ambient space."""


class MaxIterations(LogBanditError):
    """An iterative solver hit its iteration cap before certifying."""

    def __init__(self, message, certificate_gap=None):
        super().__init__(message)
        self.certificate_gap = certificate_gap


class InvalidDelta(LogBanditError):
    """A confidence parameter lies outside (0, e^{-1}]."""


class DegenerateDesign(LogBanditError):
    """MLE requested on a non-spanning design without regularization."""


class BudgetTooSmall(LogBanditError):
    """Rounding budget n is below the minimum r(eps) for this support."""


class BudgetExhausted(LogBanditError):
    """A global sample budget ran out mid-procedure."""


class LoopCap(LogBanditError):
    """The probing loop hit its safety iteration cap."""


class ConfigError(LogBanditError):
    """An experiment configuration is missing or malformed.

    ``field`` names the offending configuration key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SchemaError(LogBanditError):
    """A results file carries an unknown or missing schema version."""
