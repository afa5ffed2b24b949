"""Exception hierarchy shared across the package."""


class FlagAggError(Exception):
    """Base class for all package errors."""


class NonSymmetric(FlagAggError):
    pass


class NoConvergence(FlagAggError):
    pass


class DependentColumns(FlagAggError):
    pass


class ZeroGradient(FlagAggError):
    pass


class DomainError(FlagAggError):
    pass


class DegenerateInput(FlagAggError):
    pass


class TooFewWorkers(FlagAggError):
    pass


class BadSpec(FlagAggError):
    pass


class Overflow(FlagAggError):
    pass


class StepTooSmall(FlagAggError):
    pass


class ZeroMatrix(FlagAggError):
    pass


class ConfigError(FlagAggError):
    pass
