"""Model JSON documents: structure and save/load fidelity."""

import sys
import os
import json
import tempfile
import unittest

import numpy as np
from scipy.signal import lfilter

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from pyspforecast.errors import ConvergenceError, ModelMismatchError
from pyspforecast.ingest import UnivariateSeries, split
from pyspforecast.lstm import LstmConfig, TrainedLstm, predict_future, predict_rolling, train
from pyspforecast.sarima import SarimaModel, SarimaOrder, fit, forecast, one_step_predictions


def _series(values):
    start = np.datetime64("2012-01-02")
    return UnivariateSeries(np.arange(start, start + len(values)), values)


class TestSarimaDocument(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        rng = np.random.default_rng(99)
        e = rng.normal(0.0, 1.0, size=400)
        x = 300.0 + np.cumsum(lfilter([1.0, 0.5], [1.0, -0.3], e))
        cls.values = x
        try:
            cls.model = fit(x, SarimaOrder(1, 1, 1))
        except ConvergenceError as exc:
            cls.model = exc.best

    def test_document_structure(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "sarima_model.json")
            self.model.save(path)
            with open(path, encoding="utf-8") as f:
                doc = json.load(f)
            print(f"\n[SARIMA document] {os.path.getsize(path)} bytes")
        self.assertEqual(doc["format"], "pyspforecast/sarima")
        self.assertEqual(doc["version"], 1)
        self.assertEqual(doc["order"], {"p": 1, "d": 1, "q": 1, "P": 0, "D": 0, "Q": 0, "m": 1})
        self.assertEqual(len(doc["coefficients"]["ar"]), 1)
        self.assertEqual(doc["coefficients"]["sar"], [])
        self.assertEqual(doc["head"], [self.values[0]])
        self.assertEqual(doc["k"], 3)
        self.assertEqual(len(doc["values"]), 400)

    def test_roundtrip_forecasts_identical(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "m.json")
            self.model.save(path)
            loaded = SarimaModel.load(path)
        a, b = forecast(self.model, 126), forecast(loaded, 126)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.lower95, b.lower95)
        np.testing.assert_array_equal(a.upper95, b.upper95)
        np.testing.assert_array_equal(one_step_predictions(self.model), one_step_predictions(loaded))
        self.assertEqual(loaded.aic(), self.model.aic())
        print("  ✓ reloaded SARIMA forecasts bit-identical")

    def test_wrong_kind(self):
        doc = self.model.to_dict()
        doc["format"] = "pyspforecast/lstm"
        with self.assertRaises(ModelMismatchError):
            SarimaModel.from_dict(doc)

    def test_coefficient_count_checked(self):
        doc = self.model.to_dict()
        doc["coefficients"]["ma"] = []
        with self.assertRaises(ModelMismatchError):
            SarimaModel.from_dict(doc)


class TestLstmDocument(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        t = np.arange(300)
        cls.series = _series(50.0 + 5.0 * np.sin(2 * np.pi * t / 20.0) + 0.01 * t)
        cls.model = train(split(cls.series), LstmConfig(units=5, lookback=8, epochs=2, seed=5))

    def test_document_structure(self):
        doc = self.model.to_dict()
        self.assertEqual(doc["format"], "pyspforecast/lstm")
        self.assertEqual(doc["weights"]["gate_order"], "ifog")
        self.assertEqual(doc["weights"]["W"]["shape"], [20, 6])
        self.assertEqual(len(doc["weights"]["W"]["data"]), 120)
        self.assertEqual(doc["config"]["lookback"], 8)
        self.assertEqual(len(doc["history"]), 2)
        self.assertEqual(set(doc["scaler"]), {"x_min", "x_range"})

    def test_roundtrip_predictions_identical(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "lstm_model.json")
            self.model.save(path)
            loaded = TrainedLstm.load(path)
        np.testing.assert_array_equal(loaded.weights.W, self.model.weights.W)
        self.assertEqual(loaded.history, self.model.history)
        self.assertEqual(loaded.config, self.model.config)
        np.testing.assert_array_equal(
            predict_rolling(loaded, self.series), predict_rolling(self.model, self.series)
        )
        window = self.series.values[-8:]
        np.testing.assert_array_equal(
            predict_future(loaded, window, 30), predict_future(self.model, window, 30)
        )
        print("  ✓ reloaded LSTM predictions bit-identical")

    def test_gate_order_checked(self):
        doc = self.model.to_dict()
        doc["weights"]["gate_order"] = "fiog"
        with self.assertRaises(ModelMismatchError):
            TrainedLstm.from_dict(doc)

    def test_units_checked(self):
        doc = self.model.to_dict()
        doc["config"]["units"] = 7
        with self.assertRaises(ModelMismatchError):
            TrainedLstm.from_dict(doc)


if __name__ == "__main__":
    unittest.main()
