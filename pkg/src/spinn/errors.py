"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration (unsupported jet order, bad network shape, ...)."""


class DomainError(ValueError):
    """Coordinates fall outside the problem domain."""


class NoReferenceError(LookupError):
    """The problem has no closed-form solution to compare against."""


class NonFiniteError(FloatingPointError):
    """A loss or network output became NaN/inf.

    ``step`` is the iteration that produced it, when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
