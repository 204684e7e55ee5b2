"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class GainLossError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(GainLossError, ValueError):
    """Input failed a precondition (shape, finiteness, Hermiticity, ...)."""


class DimensionMismatchError(InvalidArgumentError):
    pass


class NotPositiveError(GainLossError, ValueError):
    """Matrix has an eigenvalue below the allowed negative clamp."""


class DefectiveMatrixError(GainLossError):
    """Eigenvector matrix is too ill-conditioned to treat the input as diagonalizable.

    The partial decomposition (eigenvalues, right vectors, condition) is kept
    on the exception so callers can still report it.
    """

    def __init__(self, message, eigenvalues=None, right_vectors=None, condition=float("inf")):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.right_vectors = right_vectors
        self.condition = condition


class InconsistencyError(GainLossError):
    """A quantity that must be real came out with a large imaginary part."""


class DensityValidationError(GainLossError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedModelError(GainLossError):
    """The requested operation does not apply to this model (e.g. kappa > 0 for the closed-form propagator)."""


class NormUnderflowError(GainLossError):
    pass


class IntegrationError(GainLossError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConditioningError(GainLossError):
    pass


class DegenerateExpansionError(GainLossError):
    pass
