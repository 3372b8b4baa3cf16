"""Exception hierarchy shared across the package."""


class RatioscopeError(Exception):
    """Base class for all errors raised by ratioscope."""


class DimensionMismatch(RatioscopeError):
    """Inputs disagree on dimensionality or feature naming."""


class TooFewSamples(RatioscopeError):
    """An operation needs more samples than were provided."""


class DegenerateData(RatioscopeError):
    """Data is degenerate (e.g. all points coincide)."""


class InvalidK(RatioscopeError):
    """Neighbor count is out of range for the sample count."""


class LineSearchFailure(RatioscopeError):
    """No decreasing step exists at machine precision."""


class NonDecrease(RatioscopeError):
    """Internal assertion: objective trace increased beyond slack."""


class NegativeThreshold(RatioscopeError):
    """Detection threshold must be nonnegative."""


class UnknownSample(RatioscopeError):
    """Requested sample id does not exist."""


class SingleClass(RatioscopeError):
    """Both classes are required for ROC/AUC computation."""


class InvalidSpec(RatioscopeError):
    """Synthetic-data specification is invalid."""


class InfeasibleNu(RatioscopeError):
    """One-class SVM nu makes the dual infeasible."""


class SingularSystem(RatioscopeError):
    """Unregularized linear system is rank-deficient."""


class AllZeroAlphas(RatioscopeError):
    """Projection annihilated all kernel coefficients."""
