"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, range, schema)."""


class DivergenceError(ArithmeticError):
    """A simulated trajectory produced non-finite values.

    Carries enough context (which quantity, which layer, when) to locate
    the blow-up; nothing is clamped or silently repaired.
    """

    def __init__(self, message, *, layer=None, epoch=None, step=None):
        super().__init__(message)
        self.layer = layer
        self.epoch = epoch
        self.step = step


class FormatError(ValueError):
    """A file does not conform to one of the on-disk formats."""


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""

    def __init__(self, message, *, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
