"""Exception types raised by the package."""


class InvalidArgumentError(ValueError):
    """An argument is outside the domain of the operation."""


class SingularUnbiasError(ArithmeticError):
    """The bias-compensation factor is singular.

    Raised when clamping is disabled and the biased error variance reaches
    the reference variance (the prior variance for signal-based unbiasing,
    the observation noise variance for noise-based unbiasing).
    """


class NumericalFailureError(ArithmeticError):
    """A linear-algebra step failed, e.g. a covariance lost definiteness."""
