"""Model reports, league tables and the lookback grid.

SARIMA reports carry MSEs in price units; LSTM reports carry them on the
min-max scaled scale, with price-unit copies under ``params`` (keys such as
``mse_test_price``). ``params["mse_unit"]`` names the unit of the top-level
MSE fields so that compare() never ranks across units by accident.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from pyspforecast.errors import (
    ConfigError,
    FormatError,
    MetricMissingError,
    MixedUnitError,
    ModelMismatchError,
    TooShortError,
)
from pyspforecast.fileio import PathLike, atomic_write_json, atomic_write_text, read_json
from pyspforecast.ingest import DataSplit
from pyspforecast.lstm import LstmConfig, TrainedLstm, mse, predict_rolling, predict_rolling_scaled, train
from pyspforecast.preprocess import rescale
from pyspforecast.sarima import SarimaModel, one_step_predictions

logger = logging.getLogger(__name__)

METRICS = ("aic", "bic", "mse_train", "mse_val", "mse_test", "runtime_seconds")
CSV_COLUMNS = ["label", "aic", "bic", "mse_train", "mse_val", "mse_test", "runtime_seconds"]
MSE_METRICS = ("mse_train", "mse_val", "mse_test")
REPORT_FORMAT = "pyspforecast/reports"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelReport:
    label: str
    aic: Optional[float] = None
    bic: Optional[float] = None
    mse_train: Optional[float] = None
    mse_val: Optional[float] = None
    mse_test: Optional[float] = None
    runtime_seconds: float = 0.0
    params: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if all(getattr(self, m) is None for m in ("aic", "bic") + MSE_METRICS):
            raise ConfigError(f"report {self.label!r} carries no metric")
        for m in MSE_METRICS:
            value = getattr(self, m)
            if value is not None and not value >= 0:
                raise ConfigError(f"report {self.label!r}: {m} must be non-negative, got {value}")

    @property
    def mse_unit(self) -> str:
        return str(self.params.get("mse_unit", "price"))

    def metric(self, key: str) -> Optional[float]:
        if key not in METRICS:
            raise ConfigError(f"unknown metric {key!r}; choose from {', '.join(METRICS)}")
        return getattr(self, key)

    def without_runtime(self) -> "ModelReport":
        return replace(self, runtime_seconds=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "ModelReport":
        def opt(key: str) -> Optional[float]:
            value = d.get(key)
            return None if value is None else float(value)

        return ModelReport(
            label=str(d["label"]),
            aic=opt("aic"),
            bic=opt("bic"),
            mse_train=opt("mse_train"),
            mse_val=opt("mse_val"),
            mse_test=opt("mse_test"),
            runtime_seconds=float(d.get("runtime_seconds") or 0.0),
            params=dict(d.get("params") or {}),
        )


def _region_mse(actual: np.ndarray, predicted: np.ndarray) -> Optional[float]:
    return mse(predicted, actual) if len(actual) else None


def evaluate_sarima(
    model: SarimaModel,
    split: DataSplit,
    label: Optional[str] = None,
    normalized_aic: bool = False,
) -> ModelReport:
    """One-step-ahead MSEs (price units) on every split, coefficients held fixed."""
    full = split.full().values
    n_train, n_val, _ = split.sizes
    if len(model.values) > len(full) or not np.array_equal(full[: len(model.values)], model.values):
        raise ModelMismatchError("model was not fitted on the start of this series")

    head = model.order.difference_spec.head_length
    preds = np.full(len(full), np.nan)
    preds[head:] = one_step_predictions(model, full)
    bounds = [(head, n_train), (n_train, n_train + n_val), (n_train + n_val, len(full))]
    train_mse, val_mse, test_mse = (
        _region_mse(full[max(lo, head) : hi], preds[max(lo, head) : hi]) for lo, hi in bounds
    )

    params: Dict[str, Any] = {
        "family": "sarima",
        "order": str(model.order),
        "k": model.k,
        "n_obs": model.n_obs,
        "sigma2": model.sigma2,
        "loglik": model.loglik,
        "mse_unit": "price",
    }
    if normalized_aic:
        params["aic_normalized"] = model.aic("normalized")
    return ModelReport(
        label=label or str(model.order),
        aic=model.aic(),
        bic=model.bic(),
        mse_train=train_mse,
        mse_val=val_mse,
        mse_test=test_mse,
        runtime_seconds=model.runtime_seconds,
        params=params,
    )


def evaluate_lstm(model: TrainedLstm, split: DataSplit, label: Optional[str] = None) -> ModelReport:
    """Final-epoch train/validation MSE and rolling test MSE, all on the scaled scale."""
    cfg = model.config
    z = cfg.lookback
    last = model.history[-1] if model.history else None
    x_range = model.scaler.x_range

    mse_test = mse_test_price = None
    if len(split.test):
        context = np.concatenate([split.train.values, split.validation.values])
        if len(context) < z:
            raise TooShortError(f"need {z} points before the test split, have {len(context)}")
        series = np.concatenate([context[-z:], split.test.values])
        mse_test = mse(predict_rolling_scaled(model, series), rescale(split.test.values, model.scaler))
        mse_test_price = mse(predict_rolling(model, series), split.test.values)

    params: Dict[str, Any] = {
        "family": "lstm",
        "dropout": cfg.dropout,
        "units": cfg.units,
        "lookback": z,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "mse_unit": "scaled",
    }
    if last is not None:
        params["mse_train_price"] = last.train_mse * x_range ** 2
        if last.val_mse is not None:
            params["mse_val_price"] = last.val_mse * x_range ** 2
    if mse_test_price is not None:
        params["mse_test_price"] = mse_test_price

    return ModelReport(
        label=label or f"lstm-z{z}",
        mse_train=None if last is None else last.train_mse,
        mse_val=None if last is None else last.val_mse,
        mse_test=mse_test,
        runtime_seconds=model.runtime_seconds,
        params=params,
    )


def lookback_grid(
    split: DataSplit,
    base: LstmConfig,
    lookbacks: Sequence[int],
    n_jobs: int = 1,
) -> List[ModelReport]:
    """Train and evaluate one model per lookback; every cell uses base.seed."""
    lookbacks = list(lookbacks)
    if not lookbacks:
        raise ConfigError("lookback grid is empty")
    for z in lookbacks:
        if z >= len(split.train):
            raise TooShortError(f"lookback {z} is not shorter than the train split ({len(split.train)})")

    def cell(z: int) -> ModelReport:
        model = train(split, replace(base, lookback=z))
        report = evaluate_lstm(model, split)
        logger.info("grid cell z=%d: val_mse=%s runtime=%.2fs", z, report.mse_val, report.runtime_seconds)
        return report

    if n_jobs <= 1:
        return [cell(z) for z in lookbacks]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(cell, lookbacks))


def lookback_table(reports: Sequence[ModelReport]) -> List[Dict[str, Any]]:
    """Rows of (dropout, units, lookback, validation MSE, runtime)."""
    return [
        {
            "dropout": r.params.get("dropout"),
            "units": r.params.get("units"),
            "lookback": r.params.get("lookback"),
            "mse": r.mse_val,
            "runtime_seconds": r.runtime_seconds,
        }
        for r in reports
    ]


def _comparable_values(reports: Sequence[ModelReport], key: str) -> List[float]:
    missing = [r.label for r in reports if r.metric(key) is None]
    if key in MSE_METRICS:
        units = {r.mse_unit for r in reports}
        if len(units) > 1:
            values = []
            for r in reports:
                v = r.metric(key) if r.mse_unit == "price" else r.params.get(f"{key}_price")
                if v is None:
                    raise MixedUnitError(
                        f"{key}: reports mix units {sorted(units)} and {r.label!r} has no price-unit value"
                    )
                values.append(float(v))
            return values
    if missing:
        raise MetricMissingError(f"{key} missing from: {', '.join(missing)}")
    return [float(r.metric(key)) for r in reports]


def compare(reports: Sequence[ModelReport], key: str = "mse_test") -> List[ModelReport]:
    """Ascending by metric, ties broken by label."""
    reports = list(reports)
    if not reports:
        return []
    values = _comparable_values(reports, key)
    ranked = sorted(zip(values, reports), key=lambda pair: (pair[0], pair[1].label))
    return [r for _, r in ranked]


def _format_cell(value: Any) -> Any:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return value


def reports_frame(reports: Sequence[ModelReport], include_runtime: bool = True) -> pd.DataFrame:
    rows = []
    for r in reports:
        row = {c: _format_cell(getattr(r, c)) for c in CSV_COLUMNS}
        if not include_runtime:
            row["runtime_seconds"] = 0.0
        rows.append(row)
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_reports_csv(reports: Sequence[ModelReport], path: PathLike, include_runtime: bool = True):
    return atomic_write_text(path, reports_frame(reports, include_runtime).to_csv(index=False))


def write_reports_json(reports: Sequence[ModelReport], path: PathLike, include_runtime: bool = True):
    items = [r if include_runtime else r.without_runtime() for r in reports]
    return atomic_write_json(
        path,
        {"format": REPORT_FORMAT, "version": FORMAT_VERSION, "reports": [r.to_dict() for r in items]},
    )


def read_reports(path: PathLike) -> List[ModelReport]:
    doc = read_json(path)
    if isinstance(doc, dict) and doc.get("format") == REPORT_FORMAT:
        return [ModelReport.from_dict(d) for d in doc["reports"]]
    if isinstance(doc, dict) and "label" in doc:
        return [ModelReport.from_dict(doc)]
    raise FormatError(f"{path}: not a report document")
