"""Exception and warning types shared across the package."""


class IntegrabilityError(Exception):
    """Base class for all package errors."""


class ValidationError(IntegrabilityError, ValueError):
    """Invalid input: bad parameters, malformed configs, domain violations."""


class UnknownFamily(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptyRegion(ValidationError):
    pass


class StepTooLarge(ValidationError):
    """A finite-difference perturbation would leave the positive orthant."""


class NumericalFailure(IntegrabilityError):
    """A computation ran but did not produce a usable result."""


class IncompletePath(NumericalFailure):
    """The compensation ODE did not reach t=1 inside the income guards."""

    def __init__(self, status, path=None):
        super().__init__(f"compensation path ended with status {status}")
        self.status = status
        self.path = path


class NoConvergence(NumericalFailure):
    pass


class NotInRange(NumericalFailure):
    pass


class BoxTooSmall(NumericalFailure):
    pass


class ChainSamplingFailed(NumericalFailure):
    pass


class NonMonotoneEstimate(UserWarning):
    """Sampling noise broke the expected monotonicity of a sup-estimate."""
