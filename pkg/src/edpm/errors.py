"""Exception hierarchy shared across the package."""


class EdpmError(Exception):
    """Base class for all package errors."""


class DomainError(EdpmError, ValueError):
    """An argument is outside its documented domain."""


class InvalidStickError(DomainError):
    """A stick-breaking vector violates its contract (e.g. last entry != 1)."""


class MatrixError(EdpmError):
    """A matrix fails a structural requirement (positive definiteness, shape)."""


class NumericalError(EdpmError):
    """A computation produced non-finite or degenerate values."""


class ConfigError(EdpmError, ValueError):
    """A configuration file or parameter set is invalid."""
