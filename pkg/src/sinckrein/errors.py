"""Exception hierarchy shared by all modules."""


class SincKreinError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SincKreinError, ValueError):
    """Invalid parameters (coupling outside (0, 1), bad grid settings, ...)."""


class NumericalError(SincKreinError, ArithmeticError):
    """A factorization or solve failed, usually because the grid is too coarse."""


class DimensionMismatch(SincKreinError, ValueError):
    pass


class StepSizeError(SincKreinError, ValueError):
    """The coefficient table is too coarse for the requested integration."""


class BranchError(SincKreinError, ValueError):
    """Evaluation requested on a branch point of a closed-form expression."""


class PoleError(SincKreinError, ZeroDivisionError):
    pass
