"""Exception types shared across the package."""


class GbrbmError(ValueError):
    """Base class for all errors raised by this package."""


class ShapeError(GbrbmError):
    """Array arguments have inconsistent or unexpected shapes."""


class DomainError(GbrbmError):
    """An input violates a value-level precondition (empty batch, NaN, ...)."""


class CapacityError(GbrbmError):
    """An exact-enumeration routine was asked for more hidden units than the guard allows."""


class FormatError(GbrbmError):
    """A file does not conform to its declared on-disk format."""


class NumericalError(GbrbmError):
    """A computation produced non-finite intermediate values."""


class ConfigError(GbrbmError):
    """A run configuration file or flag set is invalid."""
