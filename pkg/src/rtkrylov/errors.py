"""Exception hierarchy.

Validation problems (bad parameters, mismatched dimensions, indices out of
range) derive from :class:`ValidationError`; failures that only show up while
computing (empty subspace, degenerate denominators, quadrature trouble) derive
from :class:`NumericalError`. The CLI maps the two onto exit codes 2 and 3.
"""


class RTKrylovError(Exception):
    """Base class for all library errors."""


class ValidationError(RTKrylovError, ValueError):
    pass


class InvalidParameterError(ValidationError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class IndexOutOfRangeError(ValidationError, IndexError):
    pass


class WindowViolationError(ValidationError):
    """Time step does not satisfy the phase-window conditions of the bound."""


class InsufficientSamplesError(ValidationError):
    pass


class NumericalError(RTKrylovError, ArithmeticError):
    pass


class EmptySubspaceError(NumericalError):
    pass


class DegenerateInputError(NumericalError):
    pass


class ZeroNormError(NumericalError):
    pass


class ZeroOverlapError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass
