"""Plain SGD and RMSProp update rules.

Optimizer state survives activation/loss swaps; nothing here resets it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class SgdState:
    lr: float = 0.01

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")


@dataclass
class RmsPropState:
    lr: float = 0.001
    rho: float = 0.9
    eps: float = 1e-7
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if not 0 < self.rho < 1:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be > 0, got {self.eps}")


def _check(params, grads):
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise ShapeError(f"parameter shape {np.shape(p)} != gradient shape {np.shape(g)}")


def sgd_step(state: SgdState, params, grads) -> list[np.ndarray]:
    _check(params, grads)
    return [np.asarray(p, dtype=np.float64) - state.lr * np.asarray(g, dtype=np.float64)
            for p, g in zip(params, grads)]


def rmsprop_step(state: RmsPropState, params, grads) -> tuple[list[np.ndarray], RmsPropState]:
    """v <- rho v + (1 - rho) g^2 ;  w <- w - lr g / (sqrt(v) + eps). Updates ``state.v`` in place."""
    _check(params, grads)
    if not state.v:
        state.v = [np.zeros(np.shape(p)) for p in params]
    elif [v.shape for v in state.v] != [np.shape(p) for p in params]:
        raise ShapeError("accumulator shapes do not mirror parameter shapes")
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        v = state.rho * state.v[i] + (1.0 - state.rho) * g * g
        state.v[i] = v
        new_params.append(np.asarray(p, dtype=np.float64) - state.lr * g / (np.sqrt(v) + state.eps))
    return new_params, state


def make_optimizer(cfg: dict):
    cfg = dict(cfg or {})
    kind = str(cfg.pop("kind", "rmsprop")).lower()
    try:
        if kind == "sgd":
            return SgdState(**cfg)
        if kind == "rmsprop":
            return RmsPropState(**cfg)
    except TypeError as exc:
        raise ConfigError(f"bad optimizer hyperparameters: {exc}") from None
    raise ConfigError(f"unknown optimizer {kind!r}")


def optimizer_dict(state) -> dict:
    if isinstance(state, SgdState):
        return {"kind": "sgd", "lr": state.lr}
    return {"kind": "rmsprop", "lr": state.lr, "rho": state.rho, "eps": state.eps}


def step(state, params, grads) -> list[np.ndarray]:
    if isinstance(state, SgdState):
        return sgd_step(state, params, grads)
    return rmsprop_step(state, params, grads)[0]
