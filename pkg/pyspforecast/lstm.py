"""Single-layer LSTM regressor written directly in numpy.

Gate equations, with [h; x] the concatenation of the previous hidden state and
the current input:

    i, f, o = sigmoid(W_{i,f,o} [h; x] + b_{i,f,o})
    g       = tanh(W_g [h; x] + b_g)
    c_t     = f * c_{t-1} + i * g
    h_t     = o * tanh(c_t)

W has shape (4H, H + D_in) with the row blocks in the fixed order i, f, o, g.
The regressor reads out y = w_out . dropout(h_z) + b_out after z steps, where
dropout is inverted dropout applied only while training.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from pyspforecast.errors import ConfigError, DivergenceError, ModelMismatchError, ShapeError, TooShortError
from pyspforecast.fileio import PathLike, atomic_write_json, read_json
from pyspforecast.ingest import DataSplit, UnivariateSeries
from pyspforecast.optim import (
    DEFAULT_CLIP_NORM,
    DEFAULT_LEARNING_RATE,
    RmsPropState,
    clip_gradients,
    rmsprop_update,
)
from pyspforecast.preprocess import MinMaxScaler, fit_rescale, make_windows, rescale

logger = logging.getLogger(__name__)

GATE_ORDER = "ifog"
FORGET_BIAS = 1.0
INPUT_SIZE = 1
MODEL_FORMAT = "pyspforecast/lstm"
FORMAT_VERSION = 1

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class LstmConfig:
    units: int = 50
    dropout: float = 0.2
    lookback: int = 50
    epochs: int = 100
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = 32
    seed: int = 0
    clip_norm: float = DEFAULT_CLIP_NORM

    def __post_init__(self):
        if self.units < 1:
            raise ConfigError(f"units must be >= 1, got {self.units}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lookback < 1:
            raise ConfigError(f"lookback must be >= 1, got {self.lookback}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.clip_norm <= 0:
            raise ConfigError(f"clip norm must be positive, got {self.clip_norm}")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "LstmConfig":
        return LstmConfig(**d)


@dataclass(frozen=True, eq=False)
class LstmWeights:
    W: np.ndarray
    b: np.ndarray
    w_out: np.ndarray
    b_out: float

    def __post_init__(self):
        H = self.units
        if self.W.ndim != 2 or self.W.shape[0] != 4 * H or self.W.shape[1] <= H:
            raise ShapeError(f"W must be (4H, H + D_in), got {self.W.shape} for H={H}")
        if self.b.shape != (4 * H,):
            raise ShapeError(f"b must have length {4 * H}, got {self.b.shape}")

    @property
    def units(self) -> int:
        return len(self.w_out)

    @property
    def input_size(self) -> int:
        return self.W.shape[1] - self.units

    def params(self) -> Dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b, "w_out": self.w_out, "b_out": np.asarray(self.b_out)}

    @staticmethod
    def from_params(params: Dict[str, np.ndarray]) -> "LstmWeights":
        return LstmWeights(
            np.asarray(params["W"], dtype=np.float64),
            np.asarray(params["b"], dtype=np.float64),
            np.asarray(params["w_out"], dtype=np.float64),
            float(params["b_out"]),
        )

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(p))) for p in self.params().values())

    def to_dict(self) -> dict:
        return {
            "gate_order": GATE_ORDER,
            "units": self.units,
            "input_size": self.input_size,
            "W": {"shape": list(self.W.shape), "data": self.W.ravel().tolist()},
            "b": self.b.tolist(),
            "w_out": self.w_out.tolist(),
            "b_out": self.b_out,
        }

    @staticmethod
    def from_dict(d: dict) -> "LstmWeights":
        if d.get("gate_order", GATE_ORDER) != GATE_ORDER:
            raise ModelMismatchError(f"unsupported gate order {d.get('gate_order')!r}")
        W = np.asarray(d["W"]["data"], dtype=np.float64).reshape(d["W"]["shape"])
        return LstmWeights(W, np.asarray(d["b"], dtype=np.float64),
                           np.asarray(d["w_out"], dtype=np.float64), float(d["b_out"]))


@dataclass(frozen=True, eq=False)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @staticmethod
    def zeros(units: int, batch: Optional[int] = None) -> "LstmState":
        shape = (units,) if batch is None else (batch, units)
        return LstmState(np.zeros(shape), np.zeros(shape))


@dataclass(frozen=True, eq=False)
class GateCache:
    """Everything one step needs for its backward pass."""

    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    h: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    x: np.ndarray


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: Optional[float]


@dataclass(frozen=True, eq=False)
class TrainedLstm:
    config: LstmConfig
    weights: LstmWeights
    scaler: MinMaxScaler
    history: List[EpochRecord] = field(default_factory=list)
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "scaler": self.scaler.to_dict(),
            "weights": self.weights.to_dict(),
            "history": [asdict(r) for r in self.history],
            "runtime_seconds": self.runtime_seconds,
        }

    @staticmethod
    def from_dict(doc: dict) -> "TrainedLstm":
        if doc.get("format") != MODEL_FORMAT:
            raise ModelMismatchError(f"not an LSTM model document: {doc.get('format')!r}")
        config = LstmConfig.from_dict(doc["config"])
        weights = LstmWeights.from_dict(doc["weights"])
        if weights.units != config.units:
            raise ModelMismatchError("weight shapes do not match the configured units")
        return TrainedLstm(
            config=config,
            weights=weights,
            scaler=MinMaxScaler.from_dict(doc["scaler"]),
            history=[EpochRecord(**r) for r in doc.get("history", [])],
            runtime_seconds=float(doc.get("runtime_seconds", 0.0)),
        )

    def save(self, fpath: PathLike) -> None:
        """Save model to a JSON document."""
        atomic_write_json(fpath, self.to_dict())

    @staticmethod
    def load(fpath: PathLike) -> "TrainedLstm":
        return TrainedLstm.from_dict(read_json(fpath))


def init_weights(config: LstmConfig, rng: Optional[np.random.Generator] = None) -> LstmWeights:
    """Glorot-uniform gate blocks, forget bias 1, zero elsewhere."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    H = config.units
    fan_in = H + INPUT_SIZE
    limit = math.sqrt(6.0 / (fan_in + H))
    W = np.concatenate([rng.uniform(-limit, limit, size=(H, fan_in)) for _ in GATE_ORDER])
    b = np.zeros(4 * H)
    b[H : 2 * H] = FORGET_BIAS
    out_limit = math.sqrt(6.0 / (H + 1))
    w_out = rng.uniform(-out_limit, out_limit, size=H)
    return LstmWeights(W, b, w_out, 0.0)


def forward_step(
    weights: LstmWeights, x_t: ArrayLike, state: LstmState
) -> Tuple[LstmState, GateCache]:
    """One cell step. Works on single vectors (H,) or batches (B, H)."""
    H = weights.units
    x = np.asarray(x_t, dtype=np.float64)
    if state.h.shape[-1] != H or state.c.shape != state.h.shape:
        raise ShapeError(f"state must have {H} units, got h{state.h.shape} c{state.c.shape}")
    if x.shape[-1] != weights.input_size or x.shape[:-1] != state.h.shape[:-1]:
        raise ShapeError(f"input shape {x.shape} does not match state {state.h.shape}")

    a = np.concatenate([state.h, x], axis=-1) @ weights.W.T + weights.b
    i = expit(a[..., :H])
    f = expit(a[..., H : 2 * H])
    o = expit(a[..., 2 * H : 3 * H])
    g = np.tanh(a[..., 3 * H :])
    c = f * state.c + i * g
    h = o * np.tanh(c)
    return LstmState(h, c), GateCache(i, f, o, g, c, h, state.h, state.c, x)


def _dropout_scale(mask: Optional[np.ndarray], rate: float, shape: Tuple[int, ...]) -> np.ndarray:
    if mask is None:
        return np.ones(shape)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != shape:
        raise ShapeError(f"dropout mask shape {mask.shape} does not match {shape}")
    return mask / (1.0 - rate)


def forward_sequence(
    weights: LstmWeights,
    window: ArrayLike,
    dropout_mask: Optional[np.ndarray] = None,
    rate: float = 0.0,
) -> Tuple[Union[float, np.ndarray], List[GateCache]]:
    """Run a window (z,) or a batch of windows (B, z) from the zero state.

    A float is returned for a single window, an array of B predictions for a
    batch. ``dropout_mask`` (0/1, shaped like h_z) switches on training mode.
    """
    xs = np.asarray(window, dtype=np.float64)
    single = xs.ndim == 1
    if single:
        xs = xs[None, :]
    if xs.ndim != 2 or xs.shape[1] < 1:
        raise ShapeError(f"window must be (z,) or (B, z), got {np.shape(window)}")
    batch, z = xs.shape
    state = LstmState.zeros(weights.units, batch)
    caches = []
    for t in range(z):
        state, cache = forward_step(weights, xs[:, t : t + 1], state)
        caches.append(cache)
    mask = None if dropout_mask is None else np.reshape(dropout_mask, (batch, weights.units))
    h_out = state.h * _dropout_scale(mask, rate, state.h.shape)
    pred = h_out @ weights.w_out + weights.b_out
    return (float(pred[0]) if single else pred), caches


def mse(pred: ArrayLike, actual: ArrayLike) -> float:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise ShapeError(f"length mismatch: {p.shape} vs {a.shape}")
    if len(p) == 0:
        raise ShapeError("mse of empty vectors")
    diff = p - a
    return float(diff @ diff / len(diff))


def backward(
    weights: LstmWeights,
    windows: ArrayLike,
    targets: ArrayLike,
    caches: List[GateCache],
    dropout_mask: Optional[np.ndarray] = None,
    rate: float = 0.0,
) -> Dict[str, np.ndarray]:
    """Exact gradients of the batch MSE, by backpropagation through the whole window.

    Returns a dict keyed like LstmWeights.params().
    """
    xs = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).ravel()
    batch, z = xs.shape
    H = weights.units
    if len(caches) != z or len(y) != batch:
        raise ShapeError(f"{len(caches)} caches and {len(y)} targets for windows {xs.shape}")

    mask = None if dropout_mask is None else np.reshape(dropout_mask, (batch, H))
    scale = _dropout_scale(mask, rate, (batch, H))
    h_out = caches[-1].h * scale
    pred = h_out @ weights.w_out + weights.b_out

    dy = 2.0 * (pred - y) / batch
    grads = {
        "W": np.zeros_like(weights.W),
        "b": np.zeros_like(weights.b),
        "w_out": h_out.T @ dy,
        "b_out": np.asarray(dy.sum()),
    }
    dh = np.outer(dy, weights.w_out) * scale
    dc = np.zeros((batch, H))
    for cache in reversed(caches):
        tc = np.tanh(cache.c)
        dc = dc + dh * cache.o * (1.0 - tc * tc)
        da = np.concatenate(
            [
                dc * cache.g * cache.i * (1.0 - cache.i),
                dc * cache.c_prev * cache.f * (1.0 - cache.f),
                dh * tc * cache.o * (1.0 - cache.o),
                dc * cache.i * (1.0 - cache.g * cache.g),
            ],
            axis=1,
        )
        grads["W"] += da.T @ np.concatenate([cache.h_prev, cache.x], axis=1)
        grads["b"] += da.sum(axis=0)
        dh = (da @ weights.W)[:, :H]
        dc = dc * cache.f
    return grads


def rmsprop_step(
    weights: LstmWeights,
    gradients: Dict[str, np.ndarray],
    opt_state: RmsPropState,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> Tuple[LstmWeights, RmsPropState]:
    params, state = rmsprop_update(weights.params(), gradients, opt_state, learning_rate)
    return LstmWeights.from_params(params), state


def predict_windows(weights: LstmWeights, inputs: np.ndarray) -> np.ndarray:
    """Inference-mode predictions for a (B, z) batch, on the scaled scale."""
    if len(inputs) == 0:
        return np.zeros(0)
    pred, _ = forward_sequence(weights, np.atleast_2d(inputs))
    return np.asarray(pred)


def _validation_windows(
    train_scaled: np.ndarray, validation: np.ndarray, z: int
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    # validation targets are predicted from true history reaching back into train
    if len(validation) == 0:
        return None
    ws = make_windows(np.concatenate([train_scaled[-z:], validation]), z)
    return ws.inputs, ws.targets


def train(
    data: DataSplit,
    config: LstmConfig,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainedLstm:
    z = config.lookback
    if len(data.train) <= z:
        raise TooShortError(f"train split of {len(data.train)} points is too short for lookback {z}")
    started = time.perf_counter()
    train_scaled, scaler = fit_rescale(data.train)
    train_windows = make_windows(train_scaled.values, z)
    val = _validation_windows(train_scaled.values, rescale(data.validation.values, scaler), z)

    rng = np.random.default_rng(config.seed)
    weights = init_weights(config, rng)
    opt_state = RmsPropState.zeros_like(weights.params())
    n = len(train_windows)
    history: List[EpochRecord] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = train_windows.inputs[idx], train_windows.targets[idx]
            mask = None
            if config.dropout > 0:
                mask = (rng.random((len(idx), config.units)) >= config.dropout).astype(np.float64)
            pred, caches = forward_sequence(weights, xb, mask, config.dropout)
            if not np.all(np.isfinite(pred)):
                raise DivergenceError(epoch)
            grads = backward(weights, xb, yb, caches, mask, config.dropout)
            grads, _ = clip_gradients(grads, config.clip_norm)
            weights, opt_state = rmsprop_step(weights, grads, opt_state, config.learning_rate)

        train_mse = mse(predict_windows(weights, train_windows.inputs), train_windows.targets)
        val_mse = None if val is None else mse(predict_windows(weights, val[0]), val[1])
        if not math.isfinite(train_mse) or (val_mse is not None and not math.isfinite(val_mse)):
            raise DivergenceError(epoch, f"non-finite loss at epoch {epoch}")
        record = EpochRecord(epoch, train_mse, val_mse)
        history.append(record)
        logger.debug("epoch %d: train_mse=%.6g val_mse=%s", epoch, train_mse, val_mse)
        if on_epoch is not None:
            on_epoch(record)

    runtime = time.perf_counter() - started
    logger.info("trained LSTM(H=%d, z=%d) in %.2fs", config.units, z, runtime)
    return TrainedLstm(config, weights, scaler, history, runtime)


def _values(series: Union[UnivariateSeries, ArrayLike]) -> np.ndarray:
    if isinstance(series, UnivariateSeries):
        return np.asarray(series.values, dtype=np.float64)
    return np.asarray(series, dtype=np.float64)


def predict_rolling_scaled(model: TrainedLstm, series: Union[UnivariateSeries, ArrayLike]) -> np.ndarray:
    """Period-to-point predictions aligned with series[z:], on the scaled scale."""
    values = _values(series)
    z = model.config.lookback
    if len(values) <= z:
        raise TooShortError(f"need more than {z} points for rolling prediction, got {len(values)}")
    windows = make_windows(rescale(values, model.scaler), z)
    return predict_windows(model.weights, windows.inputs)


def predict_rolling(model: TrainedLstm, series: Union[UnivariateSeries, ArrayLike]) -> np.ndarray:
    """Period-to-point predictions aligned with series[z:], in price units."""
    return model.scaler.inverse_transform(predict_rolling_scaled(model, series))


def predict_future(model: TrainedLstm, last_window: ArrayLike, horizon: int) -> np.ndarray:
    """Closed-loop forecast: each prediction is fed back as the newest input."""
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    z = model.config.lookback
    window = rescale(_values(last_window), model.scaler)
    if len(window) < z:
        raise TooShortError(f"need a window of {z} values, got {len(window)}")
    window = list(window[-z:])
    out = np.empty(horizon)
    for step in range(horizon):
        out[step] = predict_windows(model.weights, np.asarray(window)[None, :])[0]
        window = window[1:] + [out[step]]
    return model.scaler.inverse_transform(out)
