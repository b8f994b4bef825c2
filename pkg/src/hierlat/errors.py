"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`HierlatError`; most also derive from :class:`ValueError` so callers
that only care about "bad input" can catch that.
"""


class HierlatError(Exception):
    """Base class for all package errors."""


class DomainError(HierlatError, ValueError):
    """Input lies outside a combiner's domain (e.g. nonpositive conductance)."""


class BoundaryError(DomainError):
    """A finite-difference stencil or mean path point touches the domain boundary."""


class SpecError(HierlatError, ValueError):
    """Malformed combiner, composition or config specification."""


class UnsupportedExponentError(SpecError):
    pass


class NormalizationError(HierlatError, ValueError):
    """A normalization constraint such as F_0(s) = 1 does not hold."""


class WeightError(HierlatError, ValueError):
    pass


class RangeError(HierlatError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DegenerateError(HierlatError, ValueError):
    """Zero variance, zero gradient, or a degenerate weight family."""


class CenteringError(HierlatError, ValueError):
    pass


class StandardizationError(HierlatError, ValueError):
    pass


class SizeMismatchError(HierlatError, ValueError):
    pass


class BudgetError(HierlatError, ValueError):
    pass


class FitError(HierlatError, ValueError):
    pass


class ConvergenceError(HierlatError, RuntimeError):
    """Raised when an iterated quantity fails to settle; carries the path."""

    def __init__(self, message, path=()):
        super().__init__(message)
        self.path = list(path)
