"""Exception types shared across the package."""

from __future__ import annotations


class GameFormatError(ValueError):
    """Malformed or invalid game, scheme or CNF input.

    ``path`` locates the offending field (e.g. ``costs.B.theta1.alpha``).
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class CapExceededError(RuntimeError):
    """An enumeration or construction exceeded its configured size cap."""


class UnsupportedGameError(ValueError):
    """The requested algorithm does not apply to this game (e.g. asymmetric players)."""


class ConvergenceError(RuntimeError):
    """Cutting-plane loop hit its iteration limit before certifying optimality."""

    def __init__(self, message: str, lower_bound: float, upper_bound: float, iterations: int):
        self.lower_bound = lower_bound
        self.upper_bound = upper_bound
        self.iterations = iterations
        super().__init__(f"{message} (bounds [{lower_bound:.10g}, {upper_bound:.10g}] after {iterations} iterations)")
