"""Exception hierarchy shared by every module in the package."""


class DualSEError(ValueError):
    """Base class for all errors raised by this package."""


class ShapeError(DualSEError):
    """Operands have incompatible or unexpected dimensions."""


class SymmetryError(DualSEError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class NumericError(DualSEError):
    """A computation produced or encountered non-finite values."""


class ArgumentError(DualSEError):
    """A scalar argument is out of its valid range."""


class CardinalityError(DualSEError):
    """A count constraint is violated (too few samples, k > n, ...)."""


class FormatError(DualSEError):
    """A file does not follow its declared binary or text format."""


class LengthError(DualSEError):
    """A payload is shorter than its header promises."""


class ConsistencyError(DualSEError):
    """Two inputs that must agree (counts, cached shapes) do not."""


class ParseError(DualSEError):
    """A text cell could not be parsed as a number."""


class DivergenceError(DualSEError):
    """Training produced a non-finite loss."""


class VersionError(DualSEError):
    """A checkpoint was written by an unsupported format version."""


class ChecksumError(DualSEError):
    """A checkpoint is truncated or its CRC does not match."""


class ConfigError(DualSEError):
    """A run configuration is invalid; the message names the field."""
