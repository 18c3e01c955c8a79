"""Exception hierarchy.

Parameter and data problems derive from :class:`ValueError`; numerical
failures (poles, non-convergence) derive from :class:`ArithmeticError`.
The CLI maps the two families onto distinct exit codes.
"""


class OptodipError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(OptodipError, ValueError):
    """A physical parameter violates one of its invariants."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NonPositiveLength(ParameterError):
    pass


class NonPositiveMass(ParameterError):
    pass


class NonPositivePower(ParameterError):
    pass


class NonPositiveDecay(ParameterError):
    pass


class OvercoupledExceedsTotal(ParameterError):
    pass


class ModeMatchingOutOfRange(ParameterError):
    pass


class NegativeNoiseLevel(ParameterError):
    pass


class LowFinesse(ParameterError):
    """Mirror transmissivity implied by kappa and L is not below 1."""


class NonPositiveDetuning(ParameterError):
    """Raised by operations that need an optical spring (detuning > 0)."""


class ConfigError(OptodipError, ValueError):
    """Malformed parameter document: unknown, missing or conflicting keys."""


class NumericalError(OptodipError, ArithmeticError):
    pass


class ZeroFrequency(NumericalError, ValueError):
    pass


class PoleAtOpticalSpring(NumericalError):
    """Evaluation requested too close to the undamped optical-spring pole."""


class NoConvergence(NumericalError):
    pass


class DataError(OptodipError, ValueError):
    pass


class InsufficientData(DataError):
    pass


class DegenerateBand(DataError):
    """The fit band does not contain an interior minimum of the data."""


class InvalidModelParams(DataError):
    pass


class MeasuredExceedsMaximum(DataError):
    pass
