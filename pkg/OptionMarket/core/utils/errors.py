"""
Error types for the OptionMarket simulator.

Every error raised on purpose by the library derives from OptionMarketError and
carries the exit code the CLI reports for it.
"""


class OptionMarketError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(OptionMarketError, ValueError):
    """Invalid parameters, invariant violations or malformed experiment files."""

    exit_code = 2


class NumericalError(OptionMarketError):
    """A numerical procedure failed or an assumption it relies on was violated."""

    exit_code = 3

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class InfeasibleError(OptionMarketError):
    """Demand cannot be served within capacity, availability and ramp limits."""

    exit_code = 4

    def __init__(self, message: str, demand: float = None, lower: float = None, upper: float = None):
        super().__init__(message)
        self.demand = demand
        self.lower = lower
        self.upper = upper
