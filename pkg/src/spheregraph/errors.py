"""Exception types shared across the package."""


class SphereGraphError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(SphereGraphError, ValueError):
    """An argument violates a documented precondition."""


class SingularWeightError(SphereGraphError):
    """Edge weighting hit a singularity (coincident vertices under 1/d weights)."""


class NumericalFailureError(SphereGraphError, RuntimeError):
    """An iterative or recursive computation failed to produce a usable result."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IllPosedAnalysisError(NumericalFailureError):
    """Harmonic analysis is ill posed (rank-deficient basis matrix)."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message, {"condition_estimate": condition_estimate})
        self.condition_estimate = condition_estimate


class UndefinedNormalizationError(SphereGraphError):
    """Equivariance error is undefined because the normalizing term vanishes."""
