"""Reversible series transforms: min-max rescaling, differencing, windowing.

Differencing applies the seasonal operator (1 - B^m)^D first and the regular
operator (1 - B)^d second; integrate() undoes them in the reverse order.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from pyspforecast.errors import ConfigError, HeadLengthError, TooShortError, ZeroRangeError
from pyspforecast.ingest import UnivariateSeries

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class MinMaxScaler:
    """x_new = (x - x_min) / x_range."""

    x_min: float
    x_range: float

    def __post_init__(self):
        if not (np.isfinite(self.x_range) and self.x_range > 0):
            raise ZeroRangeError(f"scaler range must be positive, got {self.x_range}")

    def transform(self, values: ArrayLike) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.x_min) / self.x_range

    def inverse_transform(self, scaled: ArrayLike) -> np.ndarray:
        return np.asarray(scaled, dtype=np.float64) * self.x_range + self.x_min

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_range": self.x_range}

    @staticmethod
    def from_dict(d: dict) -> "MinMaxScaler":
        return MinMaxScaler(float(d["x_min"]), float(d["x_range"]))


def fit_rescale(series: UnivariateSeries) -> Tuple[UnivariateSeries, MinMaxScaler]:
    values = series.values
    if len(values) == 0:
        raise ZeroRangeError("cannot rescale an empty series")
    x_min = float(np.min(values))
    x_range = float(np.max(values)) - x_min
    if x_range <= 0:
        raise ZeroRangeError(f"series is constant at {x_min}")
    scaler = MinMaxScaler(x_min, x_range)
    return series.with_values(scaler.transform(values)), scaler


def rescale(values: ArrayLike, scaler: MinMaxScaler) -> np.ndarray:
    """Apply an already fitted scaler; out-of-range values pass through."""
    return scaler.transform(values)


def inverse_rescale(scaled: ArrayLike, scaler: MinMaxScaler) -> np.ndarray:
    return scaler.inverse_transform(scaled)


@dataclass(frozen=True)
class DifferenceSpec:
    d: int = 0
    D: int = 0
    m: int = 1

    def __post_init__(self):
        if self.d < 0 or self.D < 0:
            raise ConfigError(f"differencing orders must be non-negative, got d={self.d} D={self.D}")
        if self.m < 1:
            raise ConfigError(f"seasonal period must be >= 1, got {self.m}")

    @property
    def head_length(self) -> int:
        return self.d + self.D * self.m


def difference(values: ArrayLike, spec: DifferenceSpec) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if len(x) <= spec.head_length:
        raise TooShortError(
            f"series of length {len(x)} too short for d={spec.d}, D={spec.D}, m={spec.m}"
        )
    for _ in range(spec.D):
        x = x[spec.m :] - x[: -spec.m]
    if spec.d:
        x = np.diff(x, n=spec.d)
    return x


def _seasonal_undiff(diffed: np.ndarray, head: np.ndarray, m: int) -> np.ndarray:
    # out[t] = out[t - m] + diffed[t - m]; rows of the reshaped array are seasons
    n = len(diffed)
    rows = -(-n // m)
    padded = np.zeros(rows * m)
    padded[:n] = diffed
    body = head + np.cumsum(padded.reshape(rows, m), axis=0)
    return np.concatenate([head, body.ravel()[:n]])


def integrate(diffed: ArrayLike, spec: DifferenceSpec, head: ArrayLike) -> np.ndarray:
    """Invert difference(); ``head`` holds the first d + D*m original values."""
    diffed = np.asarray(diffed, dtype=np.float64)
    head = np.asarray(head, dtype=np.float64)
    if len(head) != spec.head_length:
        raise HeadLengthError(f"head must hold {spec.head_length} values, got {len(head)}")

    # leading values of every intermediate series, outermost first
    seasonal_heads = [head]
    for _ in range(spec.D):
        prev = seasonal_heads[-1]
        seasonal_heads.append(prev[spec.m :] - prev[: -spec.m])
    regular_heads = [seasonal_heads[-1]]
    for _ in range(spec.d):
        regular_heads.append(np.diff(regular_heads[-1]))

    x = diffed
    for level in reversed(regular_heads[:-1]):
        x = np.concatenate([level[:1], level[0] + np.cumsum(x)])
    for level in reversed(seasonal_heads[:-1]):
        x = _seasonal_undiff(x, level[: spec.m], spec.m)
    return x


@dataclass(frozen=True, eq=False)
class WindowSet:
    """inputs[k] = source[k : k + z], targets[k] = source[k + z]."""

    inputs: np.ndarray
    targets: np.ndarray
    z: int

    def __len__(self) -> int:
        return len(self.targets)


def make_windows(values: ArrayLike, z: int) -> WindowSet:
    x = np.asarray(values, dtype=np.float64)
    if z < 1:
        raise ConfigError(f"lookback must be >= 1, got {z}")
    if len(x) <= z:
        raise TooShortError(f"series of length {len(x)} yields no window of lookback {z}")
    inputs = sliding_window_view(x, z)[:-1].copy()
    return WindowSet(inputs=inputs, targets=x[z:].copy(), z=z)


def moving_average(series: UnivariateSeries, window: int) -> UnivariateSeries:
    """Trailing simple moving average; the first window-1 points are NaN."""
    if window < 1:
        raise ConfigError(f"moving-average window must be >= 1, got {window}")
    rolled = pd.Series(series.values).rolling(window=window, min_periods=window).mean()
    return UnivariateSeries(series.dates, rolled.to_numpy(), f"ma{window}")
