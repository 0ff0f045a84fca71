"""Command-line front end.

Usage:
    pyspforecast ingest --input SPX.csv --out run/ [--range 2009-01-01:2022-05-20] [--ma 20,50,200]
    pyspforecast auto-sarima --input run/series.csv --out run/ [--m 12] [--criterion aic]
    pyspforecast fit-sarima --input run/series.csv --out run/ --order 1,2,1 --seasonal-order 0,1,1
    pyspforecast train-lstm --input run/series.csv --out run/ [--grid-lookback 20,50,100,200]
    pyspforecast forecast --model run/sarima_model.json --input run/series.csv --out run/
    pyspforecast compare --reports run/sarima_report.json run/lstm_report.json --out run/

Exit codes: 0 success, 2 file/usage/config error, 3 no model could be selected,
4 training diverged, 5 model does not match the series, 6 metric missing or
units not comparable, 1 anything else.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from pyspforecast import __version__
from pyspforecast.errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DivergenceError,
    ForecastError,
    MetricMissingError,
    ModelMismatchError,
    SelectionError,
)
from pyspforecast.evaluation import (
    compare,
    evaluate_lstm,
    evaluate_sarima,
    lookback_grid,
    lookback_table,
    read_reports,
    write_reports_csv,
    write_reports_json,
)
from pyspforecast.fileio import atomic_write_text, read_json
from pyspforecast.ingest import (
    SplitRatios,
    DEFAULT_RATIOS,
    clean,
    extract_open,
    load_csv,
    parse_day,
    read_series_csv,
    select_range,
    series_summary,
    split,
    write_series_csv,
)
from pyspforecast.lstm import MODEL_FORMAT as LSTM_FORMAT
from pyspforecast.lstm import LstmConfig, TrainedLstm, predict_future, predict_rolling, train
from pyspforecast.preprocess import moving_average
from pyspforecast import sarima

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 126

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_SELECTION = 3
EXIT_DIVERGENCE = 4
EXIT_MISMATCH = 5
EXIT_METRIC = 6


@dataclass
class RunConfig:
    """Flat settings shared by all commands; a --config JSON file holds any subset."""

    input_path: Optional[str] = None
    output_dir: str = "."
    date_range: Optional[str] = None
    split_ratios: Optional[str] = None
    horizon: int = DEFAULT_HORIZON
    seed: int = 0
    m: int = 12
    criterion: str = "aic"
    order: str = "1,2,1"
    seasonal_order: str = "0,1,1"
    units: int = 50
    dropout: float = 0.2
    lookback: int = 50
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 32
    n_jobs: int = 1
    no_runtime: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        self.ratios()

    def ratios(self) -> SplitRatios:
        if self.split_ratios is None:
            return DEFAULT_RATIOS
        if isinstance(self.split_ratios, (list, tuple)):
            return SplitRatios(*[float(v) for v in self.split_ratios])
        return SplitRatios.parse(str(self.split_ratios))

    def date_bounds(self):
        if not self.date_range:
            return None, None
        start, sep, end = self.date_range.partition(":")
        if not sep:
            raise ConfigError(f"--range must look like START:END, got {self.date_range!r}")
        for bound in (start, end):
            if bound:
                parse_day(bound)
        return start or None, end or None

    def lstm_config(self) -> LstmConfig:
        return LstmConfig(
            units=self.units,
            dropout=self.dropout,
            lookback=self.lookback,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @staticmethod
    def from_file(path: str) -> Dict[str, Any]:
        try:
            doc = read_json(path)
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {', '.join(unknown)}")
        return doc


# argparse dest -> RunConfig field
_FLAG_FIELDS = {
    "input": "input_path",
    "out": "output_dir",
    "range": "date_range",
    "split": "split_ratios",
    "horizon": "horizon",
    "seed": "seed",
    "m": "m",
    "criterion": "criterion",
    "order": "order",
    "seasonal_order": "seasonal_order",
    "units": "units",
    "dropout": "dropout",
    "lookback": "lookback",
    "epochs": "epochs",
    "learning_rate": "learning_rate",
    "batch_size": "batch_size",
    "n_jobs": "n_jobs",
    "no_runtime": "no_runtime",
}


def build_config(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(RunConfig.from_file(args.config))
    for dest, name in _FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None and value is not False:
            values[name] = value
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _require_input(cfg: RunConfig) -> Path:
    if not cfg.input_path:
        raise ConfigError("--input is required")
    path = Path(cfg.input_path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return path


def _frame_csv(frame: pd.DataFrame, path: Path) -> Path:
    atomic_write_text(path, frame.to_csv(index=False))
    print(f"✓ wrote {path}")
    return path


def _iso(dates) -> List[str]:
    return list(pd.to_datetime(dates).strftime("%Y-%m-%d"))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, args: argparse.Namespace) -> int:
    path = _require_input(cfg)
    series = clean(extract_open(load_csv(path)))
    start, end = cfg.date_bounds()
    if start or end:
        series = select_range(series, start, end)
    write_series_csv(series, cfg.out / "series.csv")
    print(f"✓ wrote {cfg.out / 'series.csv'}")

    if args.ma:
        frame = pd.DataFrame({"date": _iso(series.dates), "value": series.values})
        for window in _parse_ints(args.ma):
            frame[f"ma{window}"] = moving_average(series, window).values
        _frame_csv(frame, cfg.out / "moving_averages.csv")
    print(series_summary(series))
    return EXIT_OK


def _sarima_outputs(
    cfg: RunConfig, model: "sarima.SarimaModel", data, label: str
) -> None:
    if cfg.no_runtime:
        model = replace(model, runtime_seconds=0.0)
    model.save(cfg.out / "sarima_model.json")
    print(f"✓ wrote {cfg.out / 'sarima_model.json'}")
    report = evaluate_sarima(model, data, label=label, normalized_aic=True)
    write_reports_json([report], cfg.out / "sarima_report.json", not cfg.no_runtime)
    print(f"✓ wrote {cfg.out / 'sarima_report.json'}")
    print(f"{model.order}: AIC={model.aic():.2f} BIC={model.bic():.2f} test MSE={report.mse_test}")


def cmd_auto_sarima(cfg: RunConfig, args: argparse.Namespace) -> int:
    series = read_series_csv(_require_input(cfg))
    data = split(series, cfg.ratios())
    selection = sarima.SelectionConfig(criterion=cfg.criterion, n_jobs=cfg.n_jobs)
    model, trace = sarima.stepwise_select(data.train, cfg.m, cfg.criterion, selection)
    _frame_csv(pd.DataFrame(sarima.trace_rows(trace), columns=["order", "aic", "bic"]),
               cfg.out / "selection_trace.csv")
    _sarima_outputs(cfg, model, data, label=f"sarima {model.order}")
    return EXIT_OK


def cmd_fit_sarima(cfg: RunConfig, args: argparse.Namespace) -> int:
    series = read_series_csv(_require_input(cfg))
    data = split(series, cfg.ratios())
    order = sarima.SarimaOrder.parse(cfg.order, cfg.seasonal_order, cfg.m)
    try:
        model = sarima.fit(data.train, order)
    except ConvergenceError as exc:
        logger.warning("%s; keeping the best-so-far fit", exc)
        model = exc.best
    _sarima_outputs(cfg, model, data, label=f"sarima {order}")
    return EXIT_OK


def cmd_train_lstm(cfg: RunConfig, args: argparse.Namespace) -> int:
    series = read_series_csv(_require_input(cfg))
    data = split(series, cfg.ratios())
    base = cfg.lstm_config()

    if args.grid_lookback:
        reports = lookback_grid(data, base, _parse_ints(args.grid_lookback), cfg.n_jobs)
        if cfg.no_runtime:
            reports = [r.without_runtime() for r in reports]
        _frame_csv(pd.DataFrame(lookback_table(reports)), cfg.out / "lookback_grid.csv")
        write_reports_json(reports, cfg.out / "lstm_grid_reports.json")
        print(f"✓ wrote {cfg.out / 'lstm_grid_reports.json'}")
        return EXIT_OK

    model = train(data, base)
    if cfg.no_runtime:
        model = replace(model, runtime_seconds=0.0)
    model.save(cfg.out / "lstm_model.json")
    print(f"✓ wrote {cfg.out / 'lstm_model.json'}")
    _frame_csv(
        pd.DataFrame(
            [(r.epoch, r.train_mse, r.val_mse) for r in model.history],
            columns=["epoch", "train_mse", "val_mse"],
        ),
        cfg.out / "history.csv",
    )

    report = evaluate_lstm(model, data)
    write_reports_json([report], cfg.out / "lstm_report.json", not cfg.no_runtime)
    print(f"✓ wrote {cfg.out / 'lstm_report.json'}")

    z = base.lookback
    full = data.full()
    predicted = np.full(len(full), np.nan)
    predicted[z:] = predict_rolling(model, full)
    labels = ["train"] * len(data.train) + ["validation"] * len(data.validation) + ["test"] * len(data.test)
    _frame_csv(
        pd.DataFrame(
            {"date": _iso(full.dates), "actual": full.values, "predicted": predicted, "split": labels}
        ),
        cfg.out / "predictions.csv",
    )
    print(f"lstm z={z}: val MSE={report.mse_val} test MSE={report.mse_test} (scaled)")
    return EXIT_OK


def _future_dates(last_date, horizon: int) -> List[str]:
    start = pd.Timestamp(last_date) + pd.Timedelta(days=1)
    return _iso(pd.bdate_range(start=start, periods=horizon))


def cmd_forecast(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not args.model:
        raise ConfigError("--model is required")
    series = read_series_csv(_require_input(cfg))
    try:
        doc = read_json(args.model)
    except ValueError as exc:
        raise ConfigError(f"{args.model}: invalid JSON ({exc})") from exc
    kind = doc.get("format") if isinstance(doc, dict) else None
    dates = _future_dates(series.dates[-1], cfg.horizon)

    if kind == sarima.MODEL_FORMAT:
        model = sarima.SarimaModel.from_dict(doc)
        n = len(model.values)
        if len(series) < n or not np.array_equal(series.values[:n], model.values):
            raise ModelMismatchError("the series does not start with the model's training values")
        result = sarima.forecast(model.condition_on(series), cfg.horizon)
        frame = pd.DataFrame(
            {"date": dates, "mean": result.mean, "lower95": result.lower95, "upper95": result.upper95}
        )
    elif kind == LSTM_FORMAT:
        model = TrainedLstm.from_dict(doc)
        z = model.config.lookback
        if len(series) < z:
            raise ModelMismatchError(f"the series has fewer than lookback={z} values")
        frame = pd.DataFrame({"date": dates, "mean": predict_future(model, series.values[-z:], cfg.horizon)})
    else:
        raise ModelMismatchError(f"{args.model}: unknown model format {kind!r}")

    _frame_csv(frame, cfg.out / "forecast.csv")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not args.reports:
        raise ConfigError("--reports needs at least one report file")
    reports = [r for path in args.reports for r in read_reports(path)]
    ranked = compare(reports, args.metric)
    write_reports_csv(ranked, cfg.out / "league_table.csv", not cfg.no_runtime)
    print(f"✓ wrote {cfg.out / 'league_table.csv'}")
    print(f"ranked by {args.metric}:")
    for rank, report in enumerate(ranked, 1):
        print(f"  {rank}. {report.label}  {args.metric}={report.metric(args.metric)}  ({report.mse_unit})")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "auto-sarima": cmd_auto_sarima,
    "fit-sarima": cmd_fit_sarima,
    "train-lstm": cmd_train_lstm,
    "forecast": cmd_forecast,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input CSV (raw OHLCV for ingest, date,value otherwise)")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--config", help="flat JSON file with RunConfig keys; flags override it")
    common.add_argument("--split", help="train:validation:test ratios (default 0.72:0.18:0.10)")
    common.add_argument("--no-runtime", action="store_true", dest="no_runtime",
                        help="write runtime fields as 0.0 so outputs are byte-reproducible")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="pyspforecast",
        description="SARIMA and LSTM forecasting for daily index prices",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse OHLCV CSV into a cleaned open-price series")
    p.add_argument("--range", help="inclusive START:END date range (either side may be empty)")
    p.add_argument("--ma", help="comma-separated moving-average windows to emit")

    for name, helptext in (("auto-sarima", "stepwise SARIMA order search"),
                           ("fit-sarima", "fit one SARIMA order")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--m", type=int, help="seasonal period (default 12)")
        p.add_argument("--n-jobs", type=int, dest="n_jobs", help="worker threads for the search")
        if name == "auto-sarima":
            p.add_argument(
                "--criterion",
                choices=["aic", "bic"],
                help="ranking score (default aic); white noise reliably selects "
                "the all-zero order only with bic",
            )
        else:
            p.add_argument("--order", help="p,d,q (default 1,2,1)")
            p.add_argument("--seasonal-order", dest="seasonal_order", help="P,D,Q (default 0,1,1)")

    p = sub.add_parser("train-lstm", parents=[common], help="train the LSTM regressor")
    p.add_argument("--units", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lookback", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--n-jobs", type=int, dest="n_jobs", help="worker threads for the grid")
    p.add_argument("--grid-lookback", dest="grid_lookback",
                   help="comma-separated lookbacks; writes lookback_grid.csv instead of one model")

    p = sub.add_parser("forecast", parents=[common], help="forecast past the end of the series")
    p.add_argument("--model", help="model JSON written by auto-sarima, fit-sarima or train-lstm")
    p.add_argument("--horizon", type=int, help=f"trading days ahead (default {DEFAULT_HORIZON})")

    p = sub.add_parser("compare", parents=[common], help="rank model reports")
    p.add_argument("--reports", nargs="+", help="report JSON files")
    p.add_argument("--metric", default="mse_test",
                   choices=["aic", "bic", "mse_train", "mse_val", "mse_test", "runtime_seconds"])
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, SelectionError):
        return EXIT_SELECTION
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, ModelMismatchError):
        return EXIT_MISMATCH
    if isinstance(exc, MetricMissingError):
        return EXIT_METRIC
    if isinstance(exc, (ConfigError, DataError, OSError)):
        return EXIT_USAGE
    return EXIT_FAILURE


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ForecastError, OSError) as exc:
        if isinstance(exc, DivergenceError):
            print(f"error: {exc} (epoch {exc.epoch})", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
