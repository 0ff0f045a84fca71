"""OHLCV ingestion: CSV parsing, open-price extraction, cleaning and splitting.

The expected input is the daily export format of common market-data sites:

    Date,Open,High,Low,Close,Adj Close,Volume
    2009-01-02,902.99,934.73,899.35,931.80,931.80,4048270000

Series are indexed by trading day; weekend and holiday gaps are kept as-is.
"""

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from pyspforecast.errors import (
    ConfigError,
    DataError,
    DuplicateDateError,
    EmptySeriesError,
    FormatError,
    RowError,
    TooShortError,
)
from pyspforecast.fileio import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

EXPECTED_HEADER = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"]
PRICE_COLUMNS = ["open", "high", "low", "close", "adj_close"]
MIN_SPLIT_LENGTH = 10

DateLike = Union[str, np.datetime64, pd.Timestamp]


def _as_day_array(dates) -> np.ndarray:
    return np.asarray(pd.to_datetime(np.asarray(dates)).values).astype("datetime64[D]")


def _check_increasing(dates: np.ndarray, what: str) -> None:
    if len(dates) > 1 and not bool(np.all(dates[1:] > dates[:-1])):
        raise DataError(f"{what}: dates must be strictly increasing")


@dataclass(frozen=True, eq=False)
class UnivariateSeries:
    """A dated real-valued series (typically the daily open price)."""

    dates: np.ndarray
    values: np.ndarray
    name: str = "value"

    def __post_init__(self):
        dates = _as_day_array(self.dates) if len(self.dates) else np.array([], dtype="datetime64[D]")
        values = np.array(self.values, dtype=np.float64)
        if dates.shape != values.shape or values.ndim != 1:
            raise DataError(
                f"dates and values must be 1-D of equal length, got {dates.shape} and {values.shape}"
            )
        _check_increasing(dates, "UnivariateSeries")
        dates.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def slice(self, start: int, stop: Optional[int] = None) -> "UnivariateSeries":
        return UnivariateSeries(self.dates[start:stop], self.values[start:stop], self.name)

    def with_values(self, values: Sequence[float]) -> "UnivariateSeries":
        return UnivariateSeries(self.dates, np.asarray(values, dtype=np.float64), self.name)

    @staticmethod
    def concat(parts: Sequence["UnivariateSeries"]) -> "UnivariateSeries":
        parts = [p for p in parts if len(p)]
        if not parts:
            return UnivariateSeries(np.array([], dtype="datetime64[D]"), np.array([]))
        return UnivariateSeries(
            np.concatenate([p.dates for p in parts]),
            np.concatenate([p.values for p in parts]),
            parts[0].name,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"date": pd.to_datetime(self.dates).strftime("%Y-%m-%d"), "value": self.values}
        )


@dataclass(frozen=True, eq=False)
class OhlcvSeries:
    """Parsed OHLCV rows for one symbol, ascending by date.

    ``frame`` has a DatetimeIndex named ``date`` and the columns
    open, high, low, close, adj_close (float) and volume (int64).
    """

    symbol: str
    frame: pd.DataFrame = field(repr=False)

    def __post_init__(self):
        frame = self.frame
        if not frame.index.is_monotonic_increasing or frame.index.has_duplicates:
            raise DataError("OhlcvSeries: dates must be strictly increasing")
        if len(frame):
            prices = frame[["open", "high", "low", "close"]].to_numpy()
            if not np.all(prices > 0):
                raise DataError("OhlcvSeries: prices must be positive")
            if not np.all(frame["low"].to_numpy() <= frame["high"].to_numpy()):
                raise DataError("OhlcvSeries: low must not exceed high")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def dates(self) -> np.ndarray:
        return _as_day_array(self.frame.index)


@dataclass(frozen=True)
class SplitRatios:
    """Chronological split fractions.

    The test part takes ``floor(test * N)`` trailing points; the rest is
    divided train/validation in proportion ``train : validation``.
    """

    train: float
    validation: float
    test: float

    def __post_init__(self):
        parts = (self.train, self.validation, self.test)
        if any(not math.isfinite(p) or p <= 0 for p in parts):
            raise ConfigError(f"split ratios must be positive, got {parts}")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {sum(parts)}")

    @staticmethod
    def parse(text: str) -> "SplitRatios":
        """Parse ``"a:b:c"``; the parts are normalized to sum to 1."""
        try:
            parts = [float(p) for p in text.split(":")]
        except ValueError as exc:
            raise ConfigError(f"bad split ratios {text!r}") from exc
        if len(parts) != 3 or any(p <= 0 for p in parts):
            raise ConfigError(f"split ratios need three positive parts, got {text!r}")
        total = sum(parts)
        return SplitRatios(parts[0] / total, parts[1] / total, parts[2] / total)


# 10% held out for test, the remainder split 8:2 (the usual "7:2:1" procedure)
DEFAULT_RATIOS = SplitRatios(train=0.72, validation=0.18, test=0.10)


@dataclass(frozen=True, eq=False)
class DataSplit:
    train: UnivariateSeries
    validation: UnivariateSeries
    test: UnivariateSeries

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def full(self) -> UnivariateSeries:
        return UnivariateSeries.concat([self.train, self.validation, self.test])


def _first_line_of(mask: pd.Series) -> int:
    return int(mask.index[mask.to_numpy()][0]) + 2


def parse_csv(content: bytes, symbol: str) -> OhlcvSeries:
    """Parse an OHLCV CSV document.

    Raises FormatError for a wrong header, RowError (with 1-based file line)
    for any row that does not parse to valid prices, DuplicateDateError when
    a date repeats. Rows may appear in any order; the result is sorted.
    """
    try:
        text = content.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        line = bytes(exc.object[: exc.start]).count(b"\n") + 1
        if line == 1:
            raise FormatError("header is not valid UTF-8") from exc
        raise RowError(line, "not valid UTF-8") from exc
    try:
        raw = pd.read_csv(
            io.StringIO(text),
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError as exc:
        raise FormatError("empty CSV document") from exc
    except pd.errors.ParserError as exc:
        raise RowError(_parser_error_line(str(exc)), "wrong number of fields") from exc

    header = [str(c).strip() for c in raw.columns]
    if header != EXPECTED_HEADER:
        raise FormatError(f"expected header {','.join(EXPECTED_HEADER)}, got {','.join(header)}")
    raw.columns = ["date"] + PRICE_COLUMNS[:4] + ["adj_close", "volume"]

    # the frame index maps to file line idx + 2 (header is line 1)
    raw = raw.fillna("")
    if not raw.empty:
        raw = raw[~(raw.apply(lambda col: col.str.strip()) == "").all(axis=1)]
    if raw.empty:
        empty = pd.DataFrame({c: pd.Series(dtype=np.float64) for c in PRICE_COLUMNS})
        empty["volume"] = pd.Series(dtype=np.int64)
        empty.index = pd.DatetimeIndex([], name="date")
        return OhlcvSeries(symbol=symbol, frame=empty)

    dates = pd.to_datetime(raw["date"].str.strip(), format="%Y-%m-%d", errors="coerce")
    numbers = raw[PRICE_COLUMNS + ["volume"]].apply(
        lambda col: pd.to_numeric(col.str.strip(), errors="coerce")
    )

    checks = [
        (dates.isna(), "unparseable date"),
        (numbers.isna().any(axis=1) | ~np.isfinite(numbers).all(axis=1), "missing or non-numeric field"),
        ((numbers[["open", "high", "low", "close"]] <= 0).any(axis=1), "non-positive price"),
        (numbers["low"] > numbers["high"], "low exceeds high"),
        ((numbers["volume"] < 0) | (numbers["volume"] % 1 != 0), "volume is not a non-negative count"),
    ]
    bad_lines = [(_first_line_of(mask), reason) for mask, reason in checks if mask.any()]
    if bad_lines:
        line, reason = min(bad_lines)
        raise RowError(line, reason)

    dup = dates.duplicated()
    if dup.any():
        line = _first_line_of(dup)
        raise DuplicateDateError(dates[dup].iloc[0].strftime("%Y-%m-%d"), line)

    frame = numbers.astype({"volume": np.int64})
    frame.index = pd.DatetimeIndex(dates, name="date")
    frame = frame.sort_index()
    logger.info("parsed %d rows for %s", len(frame), symbol)
    return OhlcvSeries(symbol=symbol, frame=frame)


def _parser_error_line(message: str) -> int:
    # pandas: "Expected 7 fields in line 5, saw 8"
    for token in message.replace(",", " ").split():
        if token.isdigit() and f"line {token}" in message:
            return int(token)
    return 0


def load_csv(path: PathLike, symbol: Optional[str] = None) -> OhlcvSeries:
    p = Path(path)
    return parse_csv(p.read_bytes(), symbol or p.stem)


def extract_open(series: OhlcvSeries) -> UnivariateSeries:
    if len(series) == 0:
        raise EmptySeriesError(f"no rows for {series.symbol}")
    return UnivariateSeries(series.dates, series.frame["open"].to_numpy(dtype=np.float64), "open")


def clean(series: UnivariateSeries) -> UnivariateSeries:
    """Drop non-finite and non-positive observations."""
    keep = np.isfinite(series.values) & (series.values > 0)
    dropped = int(len(series) - keep.sum())
    if not keep.any():
        raise EmptySeriesError(f"all {len(series)} observations dropped by cleaning")
    if dropped:
        logger.info("clean: dropped %d of %d observations", dropped, len(series))
    return UnivariateSeries(series.dates[keep], series.values[keep], series.name)


def parse_day(value: DateLike) -> np.datetime64:
    """Parse a calendar date, raising ConfigError when it is not one."""
    try:
        ts = pd.Timestamp(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a valid date: {value!r}") from exc
    if pd.isna(ts):
        raise ConfigError(f"not a valid date: {value!r}")
    return np.datetime64(ts.date(), "D")


def select_range(
    series: UnivariateSeries, start: Optional[DateLike] = None, end: Optional[DateLike] = None
) -> UnivariateSeries:
    """Keep observations with start <= date <= end (both optional, inclusive)."""
    keep = np.ones(len(series), dtype=bool)
    if start is not None:
        keep &= series.dates >= parse_day(start)
    if end is not None:
        keep &= series.dates <= parse_day(end)
    if not keep.any():
        raise EmptySeriesError(f"no observations between {start} and {end}")
    return UnivariateSeries(series.dates[keep], series.values[keep], series.name)


def _floor(x: float) -> int:
    # absorb representation error such as 0.1 * 30 == 3.0000000000000004 or 0.8 * 5 == 3.9999...
    return int(math.floor(x + 1e-9))


def split_sizes(n: int, ratios: SplitRatios = DEFAULT_RATIOS) -> Tuple[int, int, int]:
    if n < MIN_SPLIT_LENGTH:
        raise TooShortError(f"need at least {MIN_SPLIT_LENGTH} observations to split, got {n}")
    n_test = _floor(ratios.test * n)
    remainder = n - n_test
    train_share = round(ratios.train / (ratios.train + ratios.validation), 12)
    n_train = _floor(train_share * remainder)
    return n_train, remainder - n_train, n_test


def split(series: UnivariateSeries, ratios: SplitRatios = DEFAULT_RATIOS) -> DataSplit:
    """Chronological train/validation/test split, no shuffling."""
    n_train, n_val, _ = split_sizes(len(series), ratios)
    return DataSplit(
        train=series.slice(0, n_train),
        validation=series.slice(n_train, n_train + n_val),
        test=series.slice(n_train + n_val),
    )


def read_series_csv(path: PathLike) -> UnivariateSeries:
    """Read a ``date,value`` file as written by write_series_csv."""
    try:
        frame = pd.read_csv(path, dtype={"date": str})
    except pd.errors.EmptyDataError as exc:
        raise FormatError(f"{path}: empty series file") from exc
    if list(frame.columns[:2]) != ["date", "value"]:
        raise FormatError(f"{path}: expected columns date,value")
    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    if dates.isna().any():
        raise RowError(_first_line_of(dates.isna()), "unparseable date")
    return UnivariateSeries(dates.values, frame["value"].to_numpy(dtype=np.float64))


def write_series_csv(series: UnivariateSeries, path: PathLike) -> Path:
    return atomic_write_text(path, series.to_frame().to_csv(index=False))


def series_summary(series: UnivariateSeries) -> str:
    if not len(series):
        return "0 rows"
    first = pd.Timestamp(series.dates[0]).strftime("%Y-%m-%d")
    last = pd.Timestamp(series.dates[-1]).strftime("%Y-%m-%d")
    return f"{len(series)} rows, {first} to {last}"


__all__: List[str] = [
    "EXPECTED_HEADER",
    "DEFAULT_RATIOS",
    "UnivariateSeries",
    "OhlcvSeries",
    "SplitRatios",
    "DataSplit",
    "parse_csv",
    "load_csv",
    "extract_open",
    "clean",
    "select_range",
    "split",
    "split_sizes",
    "read_series_csv",
    "write_series_csv",
    "series_summary",
]
