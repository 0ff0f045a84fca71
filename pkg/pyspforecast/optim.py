"""RMSProp and global-norm gradient clipping over named parameter arrays."""

from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from pyspforecast.errors import ConfigError, ShapeError

RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-7
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_CLIP_NORM = 5.0

Params = Dict[str, np.ndarray]


@dataclass(frozen=True, eq=False)
class RmsPropState:
    """Running mean of squared gradients, one array per parameter name."""

    mean_squares: Params

    @staticmethod
    def zeros_like(params: Mapping[str, np.ndarray]) -> "RmsPropState":
        return RmsPropState({name: np.zeros_like(p, dtype=np.float64) for name, p in params.items()})


def rmsprop_update(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: RmsPropState,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    rho: float = RMSPROP_RHO,
    eps: float = RMSPROP_EPS,
) -> Tuple[Params, RmsPropState]:
    """v' = rho*v + (1-rho)*g^2;  w' = w - lr*g / (sqrt(v') + eps).

    Pure: inputs are left untouched.
    """
    if learning_rate <= 0:
        raise ConfigError(f"learning rate must be positive, got {learning_rate}")
    if set(params) != set(grads) or set(params) != set(state.mean_squares):
        raise ShapeError("parameters, gradients and optimizer state must share names")
    new_params: Params = {}
    new_ms: Params = {}
    for name, w in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != np.shape(w):
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {np.shape(w)}")
        v = rho * state.mean_squares[name] + (1.0 - rho) * g * g
        new_params[name] = w - learning_rate * g / (np.sqrt(v) + eps)
        new_ms[name] = v
    return new_params, RmsPropState(new_ms)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values())))


def clip_gradients(
    grads: Mapping[str, np.ndarray], max_norm: float = DEFAULT_CLIP_NORM
) -> Tuple[Params, float]:
    """Rescale all gradients together when their global norm exceeds max_norm.

    Returns the (possibly) rescaled gradients and the norm before clipping.
    """
    if max_norm <= 0:
        raise ConfigError(f"clip norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if not np.isfinite(norm) or norm <= max_norm:
        return dict(grads), norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm
