"""Seasonal ARIMA: conditional-sum-of-squares fitting, AIC/BIC, stepwise order search.

The model is

    phi(B) Phi(B^m) (1 - B)^d (1 - B^m)^D x_t = mu + theta(B) Theta(B^m) e_t

with phi(B) = 1 - sum phi_i B^i and theta(B) = 1 + sum theta_i B^i (same for the
seasonal polynomials). Coefficients are packed as [phi..., theta..., Phi..., Theta...].

Estimation minimizes the CSS objective (pre-sample values and innovations set
to zero) with a Nelder-Mead simplex from a fixed start, so fits are
deterministic. A mean term is used only when d + D == 0, and is the sample mean
of the series.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from pyspforecast.errors import (
    ConfigError,
    ConvergenceError,
    ForecastError,
    ModelMismatchError,
    SelectionError,
    ShapeError,
    TooShortError,
)
from pyspforecast.fileio import PathLike, atomic_write_json, read_json
from pyspforecast.ingest import UnivariateSeries
from pyspforecast.preprocess import DifferenceSpec, difference, integrate

logger = logging.getLogger(__name__)

MAX_COMPLEXITY = 10
ROOT_MARGIN = 1e-3
PENALTY = 1e100
ITERATIONS_PER_PARAMETER = 500
REL_TOLERANCE = 1e-8
COEF_TOLERANCE = 1e-6
Z_95 = 1.959963984540054
# differencing is accepted when it at least halves the sample variance
VARIANCE_REDUCTION = 0.5

MODEL_FORMAT = "pyspforecast/sarima"
FORMAT_VERSION = 1

SeriesLike = Union[UnivariateSeries, Sequence[float], np.ndarray]


def _values_of(series: SeriesLike) -> np.ndarray:
    if isinstance(series, UnivariateSeries):
        return np.asarray(series.values, dtype=np.float64)
    return np.asarray(series, dtype=np.float64)


@dataclass(frozen=True)
class SarimaOrder:
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    m: int = 1

    def __post_init__(self):
        parts = self.as_tuple()
        if any(int(v) != v or v < 0 for v in parts):
            raise ConfigError(f"orders must be non-negative integers, got {parts}")
        if self.m < 1:
            raise ConfigError(f"seasonal period must be >= 1, got {self.m}")
        if self.P + self.D + self.Q > 0 and self.m < 2:
            raise ConfigError("seasonal terms need a seasonal period m >= 2")
        if self.n_coeffs > MAX_COMPLEXITY:
            raise ConfigError(f"p+q+P+Q = {self.n_coeffs} exceeds the cap of {MAX_COMPLEXITY}")

    def as_tuple(self) -> Tuple[int, int, int, int, int, int, int]:
        return (self.p, self.d, self.q, self.P, self.D, self.Q, self.m)

    @property
    def n_coeffs(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def difference_spec(self) -> DifferenceSpec:
        return DifferenceSpec(self.d, self.D, self.m)

    @property
    def min_length(self) -> int:
        return (
            self.d
            + self.D * self.m
            + max(self.p, self.q, self.P * self.m, self.Q * self.m)
            + 10
        )

    def __str__(self) -> str:
        return (
            f"ARIMA({self.p},{self.d},{self.q})({self.P},{self.D},{self.Q})[{self.m}]"
        )

    def to_dict(self) -> Dict[str, int]:
        return dict(zip("p d q P D Q m".split(), self.as_tuple()))

    @staticmethod
    def from_dict(d: Dict[str, int]) -> "SarimaOrder":
        return SarimaOrder(**{k: int(d[k]) for k in "p d q P D Q m".split()})

    @staticmethod
    def parse(nonseasonal: str, seasonal: str = "0,0,0", m: int = 1) -> "SarimaOrder":
        """Build from strings like ``"1,2,1"`` and ``"0,1,1"``."""
        try:
            p, d, q = (int(v) for v in nonseasonal.split(","))
            P, D, Q = (int(v) for v in seasonal.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad order {nonseasonal!r} / {seasonal!r}") from exc
        return SarimaOrder(p, d, q, P, D, Q, m)


def _unpack(order: SarimaOrder, coeffs: np.ndarray) -> Tuple[np.ndarray, ...]:
    cuts = np.cumsum([order.p, order.q, order.P])
    return tuple(np.split(np.asarray(coeffs, dtype=np.float64), cuts))


def _seasonal_poly(coeffs: np.ndarray, m: int, sign: float) -> np.ndarray:
    poly = np.zeros(len(coeffs) * m + 1)
    poly[0] = 1.0
    poly[m::m] = sign * coeffs
    return poly


def _polynomials(order: SarimaOrder, coeffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return (ar, ma) polynomials in ascending powers of B, both with leading 1."""
    phi, theta, sphi, stheta = _unpack(order, coeffs)
    ar = np.convolve(np.r_[1.0, -phi], _seasonal_poly(sphi, order.m, -1.0))
    ma = np.convolve(np.r_[1.0, theta], _seasonal_poly(stheta, order.m, 1.0))
    return ar, ma


def _roots_outside(poly: np.ndarray) -> bool:
    if len(poly) <= 1 or not np.any(poly[1:]):
        return True
    roots = np.roots(poly[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + ROOT_MARGIN))


def is_admissible(order: SarimaOrder, coeffs: Sequence[float]) -> bool:
    """Stationary AR parts and invertible MA parts (seasonal ones checked in B^m)."""
    phi, theta, sphi, stheta = _unpack(order, np.asarray(coeffs, dtype=np.float64))
    return (
        _roots_outside(np.r_[1.0, -phi])
        and _roots_outside(np.r_[1.0, -sphi])
        and _roots_outside(np.r_[1.0, theta])
        and _roots_outside(np.r_[1.0, stheta])
    )


def css_objective(
    order: SarimaOrder,
    coeffs: Sequence[float],
    diffed: Sequence[float],
    demean: Optional[bool] = None,
) -> Tuple[float, np.ndarray]:
    """Conditional sum of squares and residuals of an already differenced series.

    ``demean`` defaults to ``d + D == 0``. Coefficients outside the
    stationary/invertible region return a large finite penalty instead of raising.
    """
    x = np.asarray(diffed, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (order.n_coeffs,):
        raise ShapeError(f"{order} takes {order.n_coeffs} coefficients, got {coeffs.shape}")
    if demean is None:
        demean = order.d + order.D == 0
    centered = x - x.mean() if demean and len(x) else x
    ar, ma = _polynomials(order, coeffs)
    with np.errstate(over="ignore", invalid="ignore"):
        residuals = lfilter(ar, ma, centered)
    if not is_admissible(order, coeffs):
        return PENALTY, residuals
    sse = float(residuals @ residuals)
    if not math.isfinite(sse):
        return PENALTY, residuals
    return sse, residuals


def aic(loglik: float, n: int, k: int, convention: str = "standard") -> float:
    """Akaike criterion: ``standard`` is -2LL + 2k, ``normalized`` divides by N."""
    if n <= 0:
        raise ConfigError(f"AIC needs n > 0, got {n}")
    if convention == "standard":
        return -2.0 * loglik + 2.0 * k
    if convention == "normalized":
        return -2.0 / n * loglik + 2.0 * k / n
    raise ConfigError(f"unknown AIC convention {convention!r}")


def bic(loglik: float, n: int, k: int) -> float:
    if n <= 1:
        raise ConfigError(f"BIC needs n > 1, got {n}")
    return -2.0 * loglik + math.log(n) * k


@dataclass(frozen=True, eq=False)
class SarimaModel:
    order: SarimaOrder
    ar: np.ndarray
    ma: np.ndarray
    sar: np.ndarray
    sma: np.ndarray
    sigma2: float
    loglik: float
    n_obs: int
    mean: float
    values: np.ndarray = field(repr=False)
    runtime_seconds: float = 0.0

    @property
    def k(self) -> int:
        return self.order.n_coeffs + 1

    @property
    def coeffs(self) -> np.ndarray:
        return np.concatenate([self.ar, self.ma, self.sar, self.sma])

    @property
    def head(self) -> np.ndarray:
        return self.values[: self.order.difference_spec.head_length]

    def aic(self, convention: str = "standard") -> float:
        return aic(self.loglik, self.n_obs, self.k, convention)

    def bic(self) -> float:
        return bic(self.loglik, self.n_obs, self.k)

    def condition_on(self, values: SeriesLike) -> "SarimaModel":
        """Same coefficients, new conditioning history (e.g. train + held-out data)."""
        x = _values_of(values)
        if len(x) <= self.order.difference_spec.head_length:
            raise ModelMismatchError(
                f"{self.order} needs more than {self.order.difference_spec.head_length} values"
            )
        return SarimaModel(
            self.order, self.ar, self.ma, self.sar, self.sma, self.sigma2, self.loglik,
            self.n_obs, self.mean, x, self.runtime_seconds,
        )

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "order": self.order.to_dict(),
            "coefficients": {
                "ar": self.ar.tolist(),
                "ma": self.ma.tolist(),
                "sar": self.sar.tolist(),
                "sma": self.sma.tolist(),
            },
            "mean": self.mean,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "n_obs": self.n_obs,
            "k": self.k,
            "head": self.head.tolist(),
            "values": self.values.tolist(),
            "runtime_seconds": self.runtime_seconds,
        }

    @staticmethod
    def from_dict(doc: dict) -> "SarimaModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ModelMismatchError(f"not a SARIMA model document: {doc.get('format')!r}")
        c = doc["coefficients"]
        order = SarimaOrder.from_dict(doc["order"])
        arrays = [np.asarray(c[key], dtype=np.float64) for key in ("ar", "ma", "sar", "sma")]
        if [len(a) for a in arrays] != [order.p, order.q, order.P, order.Q]:
            raise ModelMismatchError("coefficient counts do not match the order")
        return SarimaModel(
            order, *arrays,
            sigma2=float(doc["sigma2"]),
            loglik=float(doc["loglik"]),
            n_obs=int(doc["n_obs"]),
            mean=float(doc["mean"]),
            values=np.asarray(doc["values"], dtype=np.float64),
            runtime_seconds=float(doc.get("runtime_seconds", 0.0)),
        )

    def save(self, fpath: PathLike) -> None:
        """Save model to a JSON document."""
        atomic_write_json(fpath, self.to_dict())

    @staticmethod
    def load(fpath: PathLike) -> "SarimaModel":
        """Load model from a JSON document written by save()."""
        return SarimaModel.from_dict(read_json(fpath))


def _start_point(n: int) -> np.ndarray:
    return np.array([0.1 if i % 2 == 0 else -0.1 for i in range(n)])


def fit(series: SeriesLike, order: SarimaOrder, max_iter: Optional[int] = None) -> SarimaModel:
    """Fit by CSS. Raises ConvergenceError (carrying the best-so-far model) when
    the simplex runs out of iterations."""
    values = _values_of(series)
    if len(values) <= order.min_length:
        raise TooShortError(f"{order} needs more than {order.min_length} observations, got {len(values)}")

    started = time.perf_counter()
    diffed = difference(values, order.difference_spec)
    demean = order.d + order.D == 0
    mean = float(diffed.mean()) if demean else 0.0
    k = order.n_coeffs + 1
    converged = True
    message = ""

    if order.n_coeffs == 0:
        coeffs = np.zeros(0)
    else:
        start = _start_point(order.n_coeffs)
        sse0, _ = css_objective(order, start, diffed, demean)
        scale = sse0 if 0.0 < sse0 < PENALTY else 1.0

        def objective(c: np.ndarray) -> float:
            return css_objective(order, c, diffed, demean)[0] / scale

        result = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={
                "maxiter": max_iter or ITERATIONS_PER_PARAMETER * k,
                "xatol": COEF_TOLERANCE,
                "fatol": REL_TOLERANCE,
            },
        )
        coeffs = np.asarray(result.x, dtype=np.float64)
        converged = bool(result.success)
        message = str(result.message)

    sse, _ = css_objective(order, coeffs, diffed, demean)
    n_eff = len(diffed)
    sigma2 = max(sse / n_eff, np.finfo(np.float64).tiny)
    loglik = -0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)
    ar, ma, sar, sma = _unpack(order, coeffs)
    model = SarimaModel(
        order, ar, ma, sar, sma, sigma2, loglik, n_eff, mean, values,
        time.perf_counter() - started,
    )
    logger.debug("fit %s: loglik=%.4f sigma2=%.6g", order, loglik, sigma2)
    if not converged:
        raise ConvergenceError(f"{order}: {message}", best=model)
    return model


def _innovations(model: SarimaModel) -> Tuple[np.ndarray, np.ndarray]:
    """Differenced history (mean removed) and its CSS residuals."""
    diffed = difference(model.values, model.order.difference_spec)
    centered = diffed - model.mean
    ar, ma = _polynomials(model.order, model.coeffs)
    return centered, lfilter(ar, ma, centered)


def one_step_predictions(model: SarimaModel, values: Optional[SeriesLike] = None) -> np.ndarray:
    """One-step-ahead level predictions, each using the true history before it.

    Aligned with ``values[d + D*m:]``; coefficients stay fixed.
    """
    if values is not None:
        model = model.condition_on(values)
    _, residuals = _innovations(model)
    return model.values[model.order.difference_spec.head_length :] - residuals


@dataclass(frozen=True, eq=False)
class ForecastResult:
    horizon: int
    mean: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return self.upper95 - self.lower95


def psi_weights(model: SarimaModel, h: int) -> np.ndarray:
    """MA(infinity) weights of the integrated model, psi_0 = 1."""
    ar, ma = _polynomials(model.order, model.coeffs)
    full_ar = ar
    for _ in range(model.order.d):
        full_ar = np.convolve(full_ar, [1.0, -1.0])
    for _ in range(model.order.D):
        full_ar = np.convolve(full_ar, _seasonal_poly(np.array([1.0]), model.order.m, -1.0))
    impulse = np.zeros(h)
    impulse[0] = 1.0
    return lfilter(ma, full_ar, impulse)


def forecast(model: SarimaModel, h: int) -> ForecastResult:
    if h < 1:
        raise ConfigError(f"forecast horizon must be >= 1, got {h}")
    ar, ma = _polynomials(model.order, model.coeffs)
    p_deg, q_deg = len(ar) - 1, len(ma) - 1
    centered, residuals = _innovations(model)

    # pre-sample zeros, then history, then the horizon (future shocks are 0)
    z = np.concatenate([np.zeros(p_deg), centered, np.zeros(h)])
    e = np.concatenate([np.zeros(q_deg), residuals, np.zeros(h)])
    n = len(centered)
    ar_tail, ma_tail = ar[1:][::-1], ma[1:][::-1]
    for t in range(n, n + h):
        zi, ei = t + p_deg, t + q_deg
        z[zi] = -(ar_tail @ z[zi - p_deg : zi]) + ma_tail @ e[ei - q_deg : ei]

    diffed_future = z[p_deg + n :] + model.mean
    history = centered + model.mean
    levels = integrate(
        np.concatenate([history, diffed_future]), model.order.difference_spec, model.head
    )[-h:]

    variance = model.sigma2 * np.cumsum(psi_weights(model, h) ** 2)
    half = Z_95 * np.sqrt(variance)
    return ForecastResult(h, levels, levels - half, levels + half)


# ---------------------------------------------------------------------------
# order selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    order: SarimaOrder
    aic: float
    bic: float

    def score(self, criterion: str) -> float:
        if criterion not in ("aic", "bic"):
            raise ConfigError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
        return self.aic if criterion == "aic" else self.bic


@dataclass(frozen=True)
class SelectionConfig:
    criterion: str = "aic"
    max_p: int = 5
    max_q: int = 5
    max_P: int = 2
    max_Q: int = 2
    max_order: int = 10
    max_d: int = 2
    max_D: int = 1
    d: Optional[int] = None
    D: Optional[int] = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.criterion not in ("aic", "bic"):
            raise ConfigError(f"criterion must be 'aic' or 'bic', got {self.criterion!r}")
        if self.max_order > MAX_COMPLEXITY:
            raise ConfigError(f"max_order may not exceed {MAX_COMPLEXITY}")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")


def best_entry(trace: Iterable[TraceEntry], criterion: str = "aic") -> TraceEntry:
    """Lowest criterion value; ties go to the smaller order tuple."""
    entries = list(trace)
    if not entries:
        raise SelectionError("empty selection trace")
    return min(entries, key=lambda e: (e.score(criterion), e.order.as_tuple()))


def _variance_drops(before: np.ndarray, after: np.ndarray) -> bool:
    return len(after) > 1 and float(np.var(after)) < VARIANCE_REDUCTION * float(np.var(before))


def choose_differencing(
    values: SeriesLike, m: int, max_d: int = 2, max_D: int = 1
) -> Tuple[int, int]:
    """Difference while each step at least halves the sample variance.

    Regular differences are tried first, then seasonal ones at period m.
    """
    x = _values_of(values)
    d = 0
    while d < max_d and len(x) > 3 and _variance_drops(x, np.diff(x)):
        x = np.diff(x)
        d += 1
    D = 0
    while m >= 2 and D < max_D and len(x) > m + 3 and _variance_drops(x, x[m:] - x[:-m]):
        x = x[m:] - x[:-m]
        D += 1
    return d, D


def _fit_candidate(values: np.ndarray, order: SarimaOrder) -> Optional[SarimaModel]:
    try:
        return fit(values, order)
    except ConvergenceError as exc:
        logger.warning("%s did not converge; using best-so-far fit", order)
        return exc.best
    except ForecastError as exc:
        logger.debug("%s skipped: %s", order, exc)
        return None
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.debug("%s failed numerically: %s", order, exc)
        return None


def _map(fn: Callable, items: List, n_jobs: int) -> List:
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def stepwise_select(
    series: SeriesLike,
    m: int = 12,
    criterion: str = "aic",
    config: Optional[SelectionConfig] = None,
) -> Tuple[SarimaModel, List[TraceEntry]]:
    """Hill-climb over (p, q, P, Q) by +-1 steps from a small set of start orders.

    d and D are chosen up front by choose_differencing() unless fixed in the
    config. Returns the best model and every evaluated order, sorted by order.
    """
    cfg = config or SelectionConfig(criterion=criterion)
    values = _values_of(series)
    seasonal = m >= 2
    d, D = choose_differencing(values, m, cfg.max_d, cfg.max_D if seasonal else 0)
    if cfg.d is not None:
        d = cfg.d
    if cfg.D is not None:
        D = cfg.D if seasonal else 0
    logger.info("stepwise: m=%d, chose d=%d D=%d", m, d, D)

    def make_order(pqPQ: Tuple[int, int, int, int]) -> Optional[SarimaOrder]:
        p, q, P, Q = pqPQ
        if not seasonal:
            P = Q = 0
        if min(p, q, P, Q) < 0:
            return None
        if p > cfg.max_p or q > cfg.max_q or P > cfg.max_P or Q > cfg.max_Q:
            return None
        if p + q + P + Q > cfg.max_order:
            return None
        order = SarimaOrder(p, d, q, P, D, Q, m if seasonal else 1)
        if len(values) <= order.min_length:
            return None
        return order

    fitted: Dict[SarimaOrder, Optional[SarimaModel]] = {}

    def evaluate(candidates: Iterable[Tuple[int, int, int, int]]) -> List[SarimaModel]:
        orders = []
        for pqPQ in candidates:
            order = make_order(pqPQ)
            if order is not None and order not in fitted and order not in orders:
                orders.append(order)
        models = _map(lambda o: _fit_candidate(values, o), orders, cfg.n_jobs)
        for order, model in zip(orders, models):
            fitted[order] = model
            if model is not None:
                logger.debug("  %s aic=%.3f bic=%.3f", order, model.aic(), model.bic())
        return [model for model in models if model is not None]

    def key(model: SarimaModel) -> Tuple[float, Tuple[int, ...]]:
        score = model.aic() if cfg.criterion == "aic" else model.bic()
        return (score, model.order.as_tuple())

    starts = [(2, 2, 1, 1), (0, 0, 0, 0), (1, 0, 1, 0), (0, 1, 0, 1)]
    current = evaluate(starts)
    if not current:
        raise SelectionError("no start order could be fitted")
    best = min(current, key=key)

    while True:
        o = best.order
        neighbors = []
        for i in range(4):
            for step in (-1, 1):
                pqPQ = [o.p, o.q, o.P, o.Q]
                pqPQ[i] += step
                neighbors.append(tuple(pqPQ))
        improved = evaluate(neighbors)
        if not improved:
            break
        challenger = min(improved, key=key)
        if key(challenger) >= key(best):
            break
        best = challenger

    trace = [
        TraceEntry(order, model.aic(), model.bic())
        for order, model in sorted(fitted.items(), key=lambda kv: kv[0].as_tuple())
        if model is not None
    ]
    logger.info("stepwise: selected %s after %d fits", best.order, len(fitted))
    return best, trace


def trace_rows(trace: Iterable[TraceEntry]) -> List[Dict[str, object]]:
    return [{"order": str(e.order), "aic": e.aic, "bic": e.bic} for e in trace]

