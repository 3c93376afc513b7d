"""Exception hierarchy shared by all tpt modules."""


class TptError(Exception):
    """Base class for every error raised by tpt."""


class DimensionError(TptError, ValueError):
    pass


class SizeError(TptError, ValueError):
    """A count or cost exceeded a configured cap."""


class NormalizationError(TptError, ValueError):
    pass


class PerturbationError(TptError, ValueError):
    pass


class NumericalError(TptError, ArithmeticError):
    pass


class OptimizationError(TptError, RuntimeError):
    """LP solver failed; ``gap`` carries the last reported residual if any."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap
