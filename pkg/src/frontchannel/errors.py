"""Exception hierarchy.

Numerical failures derive from :class:`NumericalFailure` so the CLI can map
them to exit code 3; configuration problems derive from :class:`ConfigError`
(exit code 2).
"""


class FrontChannelError(Exception):
    pass


class ConfigError(FrontChannelError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    pass


class NumericalFailure(FrontChannelError):
    pass


class TabulatedNonMonotoneSupport(ValidationError):
    pass


class NoFront(NumericalFailure):
    pass


class NonConvergence(NumericalFailure):
    pass


class ProfileSingularity(NumericalFailure):
    pass


class FrontLeftWindow(NumericalFailure):
    pass


class UnburnedExit(NumericalFailure):
    pass


class AmbiguousFront(NumericalFailure):
    pass


class PoissonNonConvergence(NumericalFailure):
    pass


class ViscousSolveNonConvergence(NumericalFailure):
    pass


class IterationDiverged(NumericalFailure):
    pass


class CFLViolation(NumericalFailure):
    pass


class PerturbationOutOfRange(ValidationError):
    pass


class ZeroField(NumericalFailure):
    pass


class InsufficientDecade(NumericalFailure):
    pass


class MissingBaseline(ValidationError):
    pass


class SandwichInfeasible(NumericalFailure):
    pass
