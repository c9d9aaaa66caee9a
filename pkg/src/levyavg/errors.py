"""Exception hierarchy shared by all modules."""


class LevyAvgError(Exception):
    """Base class for every error raised by levyavg."""


class DomainError(LevyAvgError, ValueError):
    """A parameter lies outside the domain an operation accepts."""


class NonFiniteError(LevyAvgError, ArithmeticError):
    """A simulated state became NaN or infinite.

    Heavy-tailed increments are never clamped, so overflow is reported
    instead. ``path_index`` identifies the offending path when known.
    """

    def __init__(self, message, path_index=None, step=None):
        super().__init__(message)
        self.path_index = path_index
        self.step = step


class StiffnessError(LevyAvgError, ValueError):
    """The explicit Euler step is too large for the fast dissipative drift."""


class GridMismatchError(LevyAvgError, ValueError):
    """Two paths do not live on the same time grid."""


class TruncationError(LevyAvgError, RuntimeError):
    """The corrector integrand has not decayed below tolerance at the cut-off."""


class StepTooSmall(LevyAvgError, RuntimeError):
    """A finite difference is drowned by Monte Carlo noise."""


class DegenerateFit(LevyAvgError, ValueError):
    """A regression cannot be performed on the supplied points."""


class InterpolationRangeError(LevyAvgError, ValueError):
    """A tabulated field was queried outside its tabulated domain."""


class ConfigError(LevyAvgError, ValueError):
    """An experiment configuration is invalid."""
