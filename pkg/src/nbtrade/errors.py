"""Exception types shared across the package."""


class NbTradeError(Exception):
    """Base class for all package errors."""


class ConfigError(NbTradeError, ValueError):
    """Invalid or incomplete configuration.

    ``path`` is the dotted config location that failed validation, e.g.
    ``traffic.ul_rate_bps``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericError(NbTradeError, ArithmeticError):
    """A numeric routine failed to converge or produced a non-finite value."""


class UnstableQueueError(NumericError):
    def __init__(self, direction, utilization):
        self.direction = direction
        self.utilization = utilization
        super().__init__(
            f"unstable queue: {direction} utilization {utilization:.6g} >= 1"
        )
