"""Exception types shared across the package."""

from __future__ import annotations


class CramerError(Exception):
    """Base class for every error raised by this package."""


class UsageError(CramerError, ValueError):
    """Invalid arguments or unparseable input."""


class DivergenceError(UsageError):
    """An exponential moment was requested at or beyond the abscissa of convergence."""

    def __init__(self, lam, lambda_max: float):
        self.lam = lam
        self.lambda_max = lambda_max
        super().__init__(
            f"exponential moment diverges: lambda={lam!r} is not below "
            f"the abscissa of convergence {lambda_max!r}"
        )


class NumericError(CramerError, ArithmeticError):
    """A numerical procedure failed to converge."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        self.bracket = bracket
        if bracket is not None:
            message = f"{message} (last bracket: [{bracket[0]!r}, {bracket[1]!r}])"
        super().__init__(message)
