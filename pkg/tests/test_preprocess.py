import sys
import os
import unittest

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from pyspforecast.errors import ConfigError, HeadLengthError, TooShortError, ZeroRangeError
from pyspforecast.ingest import UnivariateSeries
from pyspforecast.preprocess import (
    DifferenceSpec,
    MinMaxScaler,
    difference,
    fit_rescale,
    integrate,
    inverse_rescale,
    make_windows,
    moving_average,
    rescale,
)


def _series(values):
    start = np.datetime64("2021-03-01")
    return UnivariateSeries(np.arange(start, start + len(values)), np.asarray(values, dtype=float))


class TestRescale(unittest.TestCase):
    def test_fit_rescale_examples(self):
        scaled, scaler = fit_rescale(_series([0, 5, 10]))
        self.assertEqual(list(scaled.values), [0.0, 0.5, 1.0])
        self.assertEqual((scaler.x_min, scaler.x_range), (0.0, 10.0))
        scaled, _ = fit_rescale(_series([2, 4]))
        self.assertEqual(list(scaled.values), [0.0, 1.0])

    def test_constant_series(self):
        with self.assertRaises(ZeroRangeError):
            fit_rescale(_series([3, 3, 3]))
        with self.assertRaises(ZeroRangeError):
            MinMaxScaler(1.0, 0.0)

    def test_min_max_exact(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            scaled, _ = fit_rescale(_series(rng.normal(1000, 300, size=50)))
            self.assertEqual(scaled.values.min(), 0.0)
            self.assertEqual(scaled.values.max(), 1.0)

    def test_inverse(self):
        self.assertEqual(inverse_rescale([0.5], MinMaxScaler(0.0, 10.0))[0], 5.0)
        self.assertEqual(inverse_rescale([0.0], MinMaxScaler(7.0, 3.0))[0], 7.0)

    def test_roundtrip(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(500, 5000, size=100)
        scaler = MinMaxScaler(float(x.min()), float(x.max() - x.min()))
        back = inverse_rescale(rescale(x, scaler), scaler)
        self.assertLess(np.max(np.abs(back - x)), 1e-12 * np.max(np.abs(x)))

    def test_values_outside_training_range_pass_through(self):
        scaler = MinMaxScaler(10.0, 10.0)
        np.testing.assert_allclose(rescale([5.0, 25.0], scaler), [-0.5, 1.5])

    def test_scaler_dict(self):
        scaler = MinMaxScaler(1.25, 3.5)
        self.assertEqual(MinMaxScaler.from_dict(scaler.to_dict()), scaler)


class TestDifference(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(list(difference([1, 2, 4], DifferenceSpec(d=1))), [1.0, 2.0])
        self.assertEqual(list(difference([1, 2, 3, 4], DifferenceSpec(D=1, m=2))), [2.0, 2.0])
        self.assertEqual(
            list(difference([1, 2, 3, 4, 5, 6], DifferenceSpec(d=1, D=1, m=2))), [0.0, 0.0, 0.0]
        )

    def test_too_short(self):
        with self.assertRaises(TooShortError):
            difference([1, 2, 3], DifferenceSpec(d=1, D=1, m=2))

    def test_bad_spec(self):
        with self.assertRaises(ConfigError):
            DifferenceSpec(d=-1)
        with self.assertRaises(ConfigError):
            DifferenceSpec(m=0)

    def test_integrate_examples(self):
        self.assertEqual(list(integrate([1, 2], DifferenceSpec(d=1), [1])), [1.0, 2.0, 4.0])
        self.assertEqual(len(integrate([], DifferenceSpec(), [])), 0)
        self.assertEqual(list(integrate([], DifferenceSpec(D=1, m=2), [3, 4])), [3.0, 4.0])

    def test_head_length(self):
        with self.assertRaises(HeadLengthError):
            integrate([1, 2], DifferenceSpec(d=2), [1])

    def test_integrate_recovers_levels(self):
        rng = np.random.default_rng(2024)
        for d in (0, 1, 2):
            for D in (0, 1):
                for m in (4, 12):
                    x = 2000 + np.cumsum(rng.normal(0, 15, size=500))
                    spec = DifferenceSpec(d, D, m)
                    back = integrate(difference(x, spec), spec, x[: spec.head_length])
                    self.assertEqual(len(back), len(x))
                    self.assertLess(np.max(np.abs(back - x)), 1e-9, msg=f"d={d} D={D} m={m}")
        print("  ✓ difference/integrate exact on random walks for every (d, D, m)")

    def test_seasonal_twice(self):
        x = np.cumsum(np.arange(1.0, 40.0)) ** 1.1
        spec = DifferenceSpec(d=1, D=2, m=3)
        back = integrate(difference(x, spec), spec, x[: spec.head_length])
        np.testing.assert_allclose(back, x, atol=1e-9)


class TestWindows(unittest.TestCase):
    def test_example(self):
        w = make_windows([1, 2, 3, 4], 2)
        self.assertEqual(w.inputs.tolist(), [[1.0, 2.0], [2.0, 3.0]])
        self.assertEqual(w.targets.tolist(), [3.0, 4.0])
        self.assertEqual(len(w), 2)

    def test_boundaries(self):
        self.assertEqual(len(make_windows(np.arange(51.0), 50)), 1)
        with self.assertRaises(TooShortError):
            make_windows(np.arange(50.0), 50)
        with self.assertRaises(ConfigError):
            make_windows(np.arange(5.0), 0)

    def test_window_alignment(self):
        x = np.cumsum(np.random.default_rng(1).uniform(0.1, 1.0, size=80))
        w = make_windows(x, 7)
        self.assertEqual(len(w), 73)
        for k in (0, 30, 72):
            np.testing.assert_array_equal(w.inputs[k], x[k : k + 7])
            self.assertEqual(w.targets[k], x[k + 7])
        self.assertTrue(np.all(np.diff(w.targets) > 0))


class TestMovingAverage(unittest.TestCase):
    def test_trailing_mean(self):
        ma = moving_average(_series([1, 2, 3, 4, 5]), 3)
        self.assertTrue(np.isnan(ma.values[0]) and np.isnan(ma.values[1]))
        np.testing.assert_allclose(ma.values[2:], [2.0, 3.0, 4.0])
        self.assertEqual(ma.name, "ma3")


if __name__ == "__main__":
    unittest.main()
