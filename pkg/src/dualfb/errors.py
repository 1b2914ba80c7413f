"""Exception hierarchy shared by every module."""


class DualFBError(Exception):
    """Base class for all library errors."""


class InputError(DualFBError, ValueError):
    """Malformed or non-finite user input."""


class StructuralError(DualFBError, ValueError):
    """Shapes or operator structure are inconsistent."""


class CatalogError(DualFBError, ValueError):
    """Requested kind or parameter is not supported by the catalog."""


class CapabilityError(DualFBError):
    """A function lacks an optional capability (value, conjugate value)."""


class NumericalError(DualFBError, ArithmeticError):
    """An inner numerical routine did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(DualFBError, ValueError):
    """Solver configuration violates its admissible ranges."""


class InvalidProblemError(DualFBError, ValueError):
    """Problem instance cannot be solved as posed."""


class DivergenceError(DualFBError, ArithmeticError):
    """Iterates became non-finite; the partial trace is attached."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class RangeTooSmallError(DualFBError, ValueError):
    """Grid oracle found its minimum on the boundary of the search range."""


class RankError(StructuralError):
    """A linear system required to be nonsingular is rank deficient."""


class PGMError(InputError):
    """Malformed PGM file."""
