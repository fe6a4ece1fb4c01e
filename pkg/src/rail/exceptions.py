"""Exception hierarchy shared by all modules."""


class RailError(Exception):
    """Base class for errors raised by this package."""


class ArgumentError(RailError, ValueError):
    """An input violates a documented precondition (shape, sign, parity...)."""


class NumericError(RailError, ArithmeticError):
    """A numerical procedure failed (non-convergence, blow-up, rank explosion)."""


class SingularPencilError(NumericError):
    """The two coefficients of a Sylvester equation share an eigenvalue."""


class ConfigError(RailError, ValueError):
    """A run configuration is invalid or incomplete."""


class OutputError(RailError, OSError):
    """Writing a result file failed."""
