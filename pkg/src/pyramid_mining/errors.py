"""Exception hierarchy shared by every module."""
from __future__ import annotations

from dataclasses import dataclass


class PyramidMiningError(Exception):
    """Base class for all errors raised by this package."""


@dataclass(frozen=True)
class Violation:
    """One violated parameter constraint."""

    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ParameterError(PyramidMiningError, ValueError):
    """Invalid model parameters.

    The concrete subclass matches the first violation found; ``violations``
    lists every violated constraint so callers can report them all at once.
    """

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


class GammaOutOfRange(ParameterError):
    pass


class NonPositiveRate(ParameterError):
    pass


class BadDetainSchedule(ParameterError):
    pass


class ZeroDiagonal(PyramidMiningError, ValueError):
    pass


class SpectralRadiusAtLeastOne(PyramidMiningError, ArithmeticError):
    pass


class SingularBoundarySystem(PyramidMiningError, ArithmeticError):
    pass


class SingularSystem(PyramidMiningError, ArithmeticError):
    pass


class NegativeProbability(PyramidMiningError, ArithmeticError):
    pass


class ZeroDenominator(PyramidMiningError, ArithmeticError):
    pass


class FormMismatch(PyramidMiningError, AssertionError):
    """Closed matrix form and direct state sum disagree."""


class HonestProfitZero(PyramidMiningError, ArithmeticError):
    """The honest profit is not positive, so the advantage ratio is undefined."""


class SingularSubGenerator(PyramidMiningError, ArithmeticError):
    pass


class DefectiveAbsorption(PyramidMiningError, ArithmeticError):
    """Absorption is not certain without an explicit lead cap."""


class NoConvergence(PyramidMiningError, ArithmeticError):
    pass


class SingularBoundary(PyramidMiningError, ArithmeticError):
    pass


class TooFewWins(PyramidMiningError, RuntimeError):
    pass


class ConfigParseError(PyramidMiningError, ValueError):
    pass


class InvalidSweep(PyramidMiningError, ValueError):
    pass


class SchemaMismatch(PyramidMiningError, ValueError):
    pass
