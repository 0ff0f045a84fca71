import sys
import os
import io
import json
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from pyspforecast.cli import RunConfig, build_config, build_parser, main
from pyspforecast.errors import ConfigError
from pyspforecast.evaluation import read_reports

FIXTURE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "sp500_daily_sample.csv")
SHORT_RANGE = "2009-01-01:2010-06-30"
SMALL_LSTM = ["--units", "6", "--lookback", "10", "--epochs", "2", "--batch-size", "16"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def ingest(self, out=None, *extra):
        out = out or self.tmp
        code, _, err = run("ingest", "--input", FIXTURE, "--out", out, "--range", SHORT_RANGE, *extra)
        self.assertEqual(code, 0, err)
        return os.path.join(out, "series.csv")


class TestConfig(CliTestCase):
    def test_flags_override_file(self):
        cfg_path = self.path("run.json")
        with open(cfg_path, "w", encoding="utf-8") as f:
            json.dump({"epochs": 7, "units": 12, "split_ratios": [0.7, 0.2, 0.1]}, f)
        args = build_parser().parse_args(["train-lstm", "--config", cfg_path, "--epochs", "3"])
        cfg = build_config(args)
        self.assertEqual(cfg.epochs, 3)
        self.assertEqual(cfg.units, 12)
        self.assertAlmostEqual(cfg.ratios().validation, 0.2)
        self.assertEqual(cfg.lstm_config().units, 12)

    def test_unknown_key(self):
        cfg_path = self.path("bad.json")
        with open(cfg_path, "w", encoding="utf-8") as f:
            json.dump({"epoch": 7}, f)
        with self.assertRaises(ConfigError):
            RunConfig.from_file(cfg_path)
        code, _, err = run("train-lstm", "--config", cfg_path, "--input", FIXTURE)
        self.assertEqual(code, 2)
        self.assertIn("epoch", err)

    def test_defaults(self):
        cfg = RunConfig()
        self.assertEqual(cfg.horizon, 126)
        self.assertEqual((cfg.units, cfg.dropout, cfg.lookback), (50, 0.2, 50))
        self.assertEqual(cfg.date_bounds(), (None, None))
        with self.assertRaises(ConfigError):
            RunConfig(date_range="2010-01-01").date_bounds()
        with self.assertRaises(ConfigError):
            RunConfig(horizon=0)


class TestIngest(CliTestCase):
    def test_writes_series(self):
        code, out, _ = run("ingest", "--input", FIXTURE, "--out", self.tmp)
        self.assertEqual(code, 0)
        frame = pd.read_csv(self.path("series.csv"))
        self.assertEqual(list(frame.columns), ["date", "value"])
        self.assertEqual(len(frame), 1500)
        self.assertIn("1500 rows", out)

    def test_range_and_moving_averages(self):
        self.ingest(None, "--ma", "5,20")
        series = pd.read_csv(self.path("series.csv"))
        self.assertEqual(series["date"].iloc[0], "2009-01-02")
        self.assertLessEqual(series["date"].iloc[-1], "2010-06-30")
        ma = pd.read_csv(self.path("moving_averages.csv"))
        self.assertEqual(list(ma.columns), ["date", "value", "ma5", "ma20"])
        self.assertEqual(int(ma["ma20"].isna().sum()), 19)
        self.assertAlmostEqual(ma["ma5"].iloc[4], ma["value"].iloc[:5].mean())

    def test_missing_input(self):
        code, _, err = run("ingest", "--input", self.path("nope.csv"), "--out", self.tmp)
        self.assertEqual(code, 2)
        self.assertIn("not found", err)

    def test_malformed_input(self):
        bad = self.path("bad.csv")
        with open(bad, "w", encoding="utf-8") as f:
            f.write("Date,Open,High,Low,Close,Adj Close,Volume\n2020-01-02,abc,1,1,1,1,1\n")
        code, _, err = run("ingest", "--input", bad, "--out", self.tmp)
        self.assertEqual(code, 2)
        self.assertIn("line 2", err)

    def test_bad_range_date(self):
        code, _, err = run("ingest", "--input", FIXTURE, "--out", self.tmp, "--range", "2009-13-45:2010-01-01")
        self.assertEqual(code, 2)
        self.assertIn("2009-13-45", err)
        with self.assertRaises(ConfigError):
            RunConfig(date_range="2009-01-01:someday").date_bounds()

    def test_non_utf8_input(self):
        bad = self.path("latin1.csv")
        with open(bad, "wb") as f:
            f.write(b"Date,Open,High,Low,Close,Adj Close,Volume\n2020-01-02,\xff,1,1,1,1,1\n")
        code, _, err = run("ingest", "--input", bad, "--out", self.tmp)
        self.assertEqual(code, 2)
        self.assertIn("line 2", err)


class TestSarimaCommands(CliTestCase):
    def test_fit_sarima(self):
        series = self.ingest()
        code, _, err = run("fit-sarima", "--input", series, "--out", self.tmp,
                           "--order", "1,1,0", "--seasonal-order", "0,0,0")
        self.assertEqual(code, 0, err)
        report = read_reports(self.path("sarima_report.json"))[0]
        self.assertEqual(report.params["order"], "ARIMA(1,1,0)(0,0,0)[12]")
        self.assertIsNotNone(report.aic)
        self.assertIn("aic_normalized", report.params)
        with open(self.path("sarima_model.json"), encoding="utf-8") as f:
            self.assertEqual(json.load(f)["format"], "pyspforecast/sarima")

    def test_auto_sarima_trace(self):
        series = self.ingest()
        code, _, err = run("auto-sarima", "--input", series, "--out", self.tmp, "--criterion", "bic")
        self.assertEqual(code, 0, err)
        trace = pd.read_csv(self.path("selection_trace.csv"))
        self.assertEqual(list(trace.columns), ["order", "aic", "bic"])
        self.assertGreaterEqual(len(trace), 1)
        chosen = read_reports(self.path("sarima_report.json"))[0]
        best = float(trace["bic"].min())
        self.assertLess(abs(chosen.bic - best), 1e-9 * abs(best))

    def test_criterion_help_names_bic(self):
        out = io.StringIO()
        with redirect_stdout(out), self.assertRaises(SystemExit):
            build_parser().parse_args(["auto-sarima", "--help"])
        self.assertIn("all-zero order only with bic", " ".join(out.getvalue().split()))

    def test_bad_order(self):
        series = self.ingest()
        code, _, _ = run("fit-sarima", "--input", series, "--out", self.tmp, "--order", "1,x,1")
        self.assertEqual(code, 2)


class TestLstmCommands(CliTestCase):
    def test_train_lstm_outputs(self):
        series = self.ingest()
        code, _, err = run("train-lstm", "--input", series, "--out", self.tmp, *SMALL_LSTM)
        self.assertEqual(code, 0, err)
        history = pd.read_csv(self.path("history.csv"))
        self.assertEqual(list(history["epoch"]), [1, 2])
        predictions = pd.read_csv(self.path("predictions.csv"))
        self.assertEqual(list(predictions.columns), ["date", "actual", "predicted", "split"])
        self.assertEqual(int(predictions["predicted"].isna().sum()), 10)
        self.assertEqual(set(predictions["split"]), {"train", "validation", "test"})
        report = read_reports(self.path("lstm_report.json"))[0]
        self.assertEqual(report.mse_unit, "scaled")

    def test_zero_epochs_rejected(self):
        series = self.ingest()
        code, _, err = run("train-lstm", "--input", series, "--out", self.tmp, "--epochs", "0")
        self.assertEqual(code, 2)
        self.assertIn("epochs", err)

    def test_grid(self):
        series = self.ingest()
        code, _, err = run("train-lstm", "--input", series, "--out", self.tmp, "--units", "4",
                           "--epochs", "1", "--grid-lookback", "5,10,20")
        self.assertEqual(code, 0, err)
        grid = pd.read_csv(self.path("lookback_grid.csv"))
        self.assertEqual(list(grid.columns), ["dropout", "units", "lookback", "mse", "runtime_seconds"])
        self.assertEqual(list(grid["lookback"]), [5, 10, 20])
        self.assertEqual(len(read_reports(self.path("lstm_grid_reports.json"))), 3)


class TestForecastAndCompare(CliTestCase):
    def setUp(self):
        super().setUp()
        self.series = self.ingest()

    def test_sarima_forecast(self):
        code, _, err = run("fit-sarima", "--input", self.series, "--out", self.tmp,
                           "--order", "0,1,1", "--seasonal-order", "0,0,0")
        self.assertEqual(code, 0, err)
        code, _, err = run("forecast", "--model", self.path("sarima_model.json"),
                           "--input", self.series, "--out", self.tmp)
        self.assertEqual(code, 0, err)
        frame = pd.read_csv(self.path("forecast.csv"))
        self.assertEqual(len(frame), 126)
        self.assertEqual(list(frame.columns), ["date", "mean", "lower95", "upper95"])
        width = (frame["upper95"] - frame["lower95"]).to_numpy()
        self.assertTrue(np.all(np.diff(width) >= -1e-9))
        last = pd.read_csv(self.series)["date"].iloc[-1]
        self.assertGreater(frame["date"].iloc[0], last)
        self.assertTrue(all(pd.Timestamp(d).weekday() < 5 for d in frame["date"]))

    def test_lstm_forecast(self):
        code, _, err = run("train-lstm", "--input", self.series, "--out", self.tmp, *SMALL_LSTM)
        self.assertEqual(code, 0, err)
        code, _, err = run("forecast", "--model", self.path("lstm_model.json"), "--input", self.series,
                           "--out", self.tmp, "--horizon", "20")
        self.assertEqual(code, 0, err)
        frame = pd.read_csv(self.path("forecast.csv"))
        self.assertEqual(list(frame.columns), ["date", "mean"])
        self.assertEqual(len(frame), 20)

    def test_forecast_wrong_series(self):
        code, _, _ = run("fit-sarima", "--input", self.series, "--out", self.tmp,
                         "--order", "0,1,1", "--seasonal-order", "0,0,0")
        self.assertEqual(code, 0)
        other = self.path("other.csv")
        frame = pd.read_csv(self.series)
        frame["value"] = frame["value"] + 1.0
        frame.to_csv(other, index=False)
        code, _, _ = run("forecast", "--model", self.path("sarima_model.json"), "--input", other, "--out", self.tmp)
        self.assertEqual(code, 5)

    def test_compare(self):
        run("fit-sarima", "--input", self.series, "--out", self.tmp, "--order", "0,1,1", "--seasonal-order", "0,0,0")
        run("train-lstm", "--input", self.series, "--out", self.tmp, *SMALL_LSTM)
        reports = [self.path("sarima_report.json"), self.path("lstm_report.json")]
        code, out, err = run("compare", "--reports", *reports, "--out", self.tmp)
        self.assertEqual(code, 0, err)
        table = pd.read_csv(self.path("league_table.csv"))
        self.assertEqual(len(table), 2)
        self.assertIn("ranked by mse_test", out)

        code, _, _ = run("compare", "--reports", *reports, "--out", self.tmp, "--metric", "aic")
        self.assertEqual(code, 6)

    def test_compare_mixed_units(self):
        doc = {
            "format": "pyspforecast/reports",
            "version": 1,
            "reports": [
                {"label": "sarima", "mse_test": 30.0, "params": {"mse_unit": "price"}},
                {"label": "lstm", "mse_test": 0.002, "params": {"mse_unit": "scaled"}},
            ],
        }
        path = self.path("mixed.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f)
        code, _, _ = run("compare", "--reports", path, "--out", self.tmp)
        self.assertEqual(code, 6)


class TestEndToEnd(unittest.TestCase):
    OUTPUTS = [
        "series.csv",
        "selection_trace.csv",
        "sarima_model.json",
        "sarima_report.json",
        "lstm_model.json",
        "history.csv",
        "lstm_report.json",
        "predictions.csv",
        "forecast.csv",
        "league_table.csv",
    ]

    def _pipeline(self, out):
        steps = [
            ["ingest", "--input", FIXTURE, "--range", SHORT_RANGE],
            ["auto-sarima", "--input", os.path.join(out, "series.csv")],
            ["train-lstm", "--input", os.path.join(out, "series.csv"), *SMALL_LSTM],
            ["forecast", "--model", os.path.join(out, "sarima_model.json"),
             "--input", os.path.join(out, "series.csv")],
            ["compare", "--reports", os.path.join(out, "sarima_report.json"),
             os.path.join(out, "lstm_report.json")],
        ]
        for step in steps:
            code, _, err = run(*step, "--out", out, "--seed", "7", "--no-runtime")
            self.assertEqual(code, 0, f"{step[0]}: {err}")

    def _read(self, root, name):
        with open(os.path.join(root, name), "rb") as f:
            return f.read()

    def test_byte_identical_reruns(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            self._pipeline(a)
            self._pipeline(b)
            for name in self.OUTPUTS:
                self.assertEqual(self._read(a, name), self._read(b, name), name)
        print(f"  ✓ {len(self.OUTPUTS)} pipeline outputs byte-identical across runs")


if __name__ == "__main__":
    unittest.main()
