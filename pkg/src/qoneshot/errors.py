"""Exception taxonomy.

Two families: validation failures (bad inputs, violated preconditions) and
computational failures (an algorithm that could not certify its own result).
The CLI maps ValidationError to exit code 2 and ComputeError to exit code 3.
"""


class QOneShotError(Exception):
    """Base class for all library errors."""


class ValidationError(QOneShotError):
    """Input or precondition violation. CLI exit code 2."""


class ComputeError(QOneShotError):
    """A computation failed to converge or certify itself. CLI exit code 3."""


class LabelCollision(ValidationError):
    """Duplicate register label in a layout or tensor product."""


class UnknownLabel(ValidationError):
    """A register label is not present in the layout."""


class NotNormalized(ValidationError):
    """Trace (or norm) differs from 1 beyond tolerance."""

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class ShapeMismatch(ValidationError):
    """Array shape or dimension inconsistent with the layout."""


class BadPartition(ValidationError):
    """A register bipartition does not cover / over-covers the layout."""


class NotHermitian(ValidationError):
    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class NotPSD(ValidationError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NotCPTP(ValidationError):
    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class BadParam(ValidationError):
    """Scalar parameter outside its admissible range."""


class SupportViolation(ValidationError):
    """supp(rho) is not contained in supp(sigma); carries the escaped mass."""

    def __init__(self, message, mass=None):
        super().__init__(message)
        self.mass = mass


class DimGuard(ValidationError):
    """Requested object exceeds the dimension guard."""


class MarginalMismatch(ValidationError):
    """Two states that must share a marginal do not."""


class RegionViolation(ValidationError):
    """Requested rate/band-size point lies outside the achievable region."""


class NoConverge(ComputeError):
    """Iterative search exhausted its budget; carries bracket diagnostics."""

    def __init__(self, message, bracket=None, iterations=None):
        super().__init__(message)
        self.bracket = bracket
        self.iterations = iterations


class TypicalityFail(ValidationError):
    """Typical projector captured too little mass at the requested block length."""

    def __init__(self, message, capture=None, needed=None):
        super().__init__(message)
        self.capture = capture
        self.needed = needed
