"""Exception hierarchy shared by every pyspforecast module.

All errors derive from ForecastError so callers (and the CLI) can catch the
whole family at once. Validation-type errors also derive from ValueError.
"""

from typing import Any, Optional


class ForecastError(Exception):
    """Root of all pyspforecast errors."""


class ConfigError(ForecastError, ValueError):
    """Invalid configuration or parameter value."""


class DataError(ForecastError, ValueError):
    """Input data violates a structural requirement."""


# ingestion

class FormatError(DataError):
    """CSV header or overall layout is not the expected OHLCV format."""


class RowError(DataError):
    def __init__(self, line: int, reason: str = "unparseable row"):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DuplicateDateError(DataError):
    def __init__(self, date: Any, line: Optional[int] = None):
        self.date = date
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate date {date}{where}")


class EmptySeriesError(DataError):
    """A series has no usable observations."""


class TooShortError(DataError):
    """A series is too short for the requested operation."""


# preprocessing

class ZeroRangeError(DataError):
    """Min-max rescaling of a constant series."""


class HeadLengthError(DataError):
    """Integration head does not hold exactly d + D*m values."""


# models

class ShapeError(ForecastError, ValueError):
    """Array dimensions are inconsistent with the model."""


class ConvergenceError(ForecastError):
    """Optimizer hit its iteration budget; ``best`` holds the best-so-far model."""

    def __init__(self, message: str, best: Any = None):
        self.best = best
        super().__init__(message)


class SelectionError(ForecastError):
    """No candidate model in an order search could be fitted."""


class DivergenceError(ForecastError):
    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class ModelMismatchError(ForecastError):
    """A saved model does not fit the series it is applied to."""


# evaluation

class MetricMissingError(ForecastError, KeyError):
    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return str(self.args[0]) if self.args else ""


class MixedUnitError(MetricMissingError):
    """Reports carry MSEs in different units and no common price-unit MSE."""
