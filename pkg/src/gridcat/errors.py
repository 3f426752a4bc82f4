"""Exception types shared across the package."""


class GridcatError(Exception):
    """Base class for all gridcat errors."""


class InvalidArgumentError(GridcatError, ValueError):
    """An argument violates a documented precondition."""


class NumericalDegeneracyError(GridcatError, ArithmeticError):
    """A posterior collapsed to zero everywhere at machine precision."""


class ExhaustedBankError(GridcatError, RuntimeError):
    """Item selection was requested but no items remain."""


class BankLoadError(GridcatError, ValueError):
    """A bank, log, or report file failed validation on load."""
