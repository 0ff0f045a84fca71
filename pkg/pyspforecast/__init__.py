"""pyspforecast - SARIMA and LSTM forecasting for daily stock index prices.

This package fits seasonal ARIMA models by conditional sum of squares with a
stepwise AIC/BIC order search, trains a single-layer LSTM written directly in
numpy, and compares the two on chronological train/validation/test splits.

Modules:
- ingest: OHLCV CSV parsing, open-price extraction, cleaning, splitting
- preprocess: min-max scaling, differencing/integration, lookback windows
- sarima: CSS fitting, AIC/BIC, stepwise selection, forecasts with intervals
- optim: RMSProp and gradient clipping
- lstm: LSTM cell, backpropagation through time, training and prediction
- evaluation: model reports, league tables, lookback grid
- cli: the ``pyspforecast`` command

Usage example:
    from pyspforecast import ingest, sarima
    series = ingest.clean(ingest.extract_open(ingest.load_csv("SPX.csv")))
    data = ingest.split(series)
    model, trace = sarima.stepwise_select(data.train, m=12)
    fc = sarima.forecast(model, 126)

"""

__version__ = "0.1.0"
__author__ = "pyspforecast contributors"
__license__ = "MIT"

from .errors import ForecastError
from .ingest import UnivariateSeries, DataSplit, SplitRatios, load_csv, extract_open, clean, split
from .sarima import SarimaOrder, SarimaModel, fit, forecast, stepwise_select
from .lstm import LstmConfig, TrainedLstm, train
from .evaluation import ModelReport, compare, evaluate_lstm, evaluate_sarima

__all__ = [
    "ForecastError",
    "UnivariateSeries",
    "DataSplit",
    "SplitRatios",
    "load_csv",
    "extract_open",
    "clean",
    "split",
    "SarimaOrder",
    "SarimaModel",
    "fit",
    "forecast",
    "stepwise_select",
    "LstmConfig",
    "TrainedLstm",
    "train",
    "ModelReport",
    "compare",
    "evaluate_sarima",
    "evaluate_lstm",
    "__version__",
]
