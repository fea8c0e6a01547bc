"""Exception hierarchy shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


class SsgdError(Exception):
    """Base class for all package errors."""


@dataclass(frozen=True)
class Violation:
    """A single dataset-validation failure.

    ``index`` is the offending row (for outcome problems) or column
    (for regressor problems); ``None`` when the violation is global.
    """

    code: str
    index: int | None
    message: str

    def __str__(self) -> str:
        return self.message


class ValidationError(SsgdError):
    """Raised when raw inputs violate dataset invariants.

    Carries the full list of violations so callers can report every
    problem at once instead of failing on the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ConfigError(SsgdError):
    """Invalid estimator or simulation configuration."""


class NumericError(SsgdError):
    """Non-finite values or failed numerical routines mid-computation."""


class DegenerateIndexError(SsgdError):
    """The scalar index has zero sample variance; no basis can be built."""


class RankError(SsgdError):
    """Basis columns are rank deficient at the requested order."""

    def __init__(self, requested: int, achievable: int):
        self.requested = requested
        self.achievable = achievable
        super().__init__(
            f"basis rank deficient at order {requested}; "
            f"achievable order is {achievable}"
        )


class NormalizationError(SsgdError):
    """The numeraire coefficient is numerically zero."""


class NonInvertibleError(NumericError):
    """A matrix that must be inverted is numerically singular."""

    def __init__(self, message: str, rcond: float):
        self.rcond = rcond
        super().__init__(message)
