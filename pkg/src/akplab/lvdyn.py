"""Two-population Lotka-Volterra dynamics and the linear population-to-feature map.

Prey ``W1`` and predator ``W2`` obey::

    dW1/dt = W1 (a - b W2)
    dW2/dt = W2 (-c + d W1)

When the interaction terms vanish (b = d = 0) the solution is the pair of
exponentials ``W1(0) e^{a t}``, ``W2(0) e^{-c t}``; :func:`decoupled_solution`
evaluates that closed form for any parameters so its departure from the
coupled integration can be measured.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class LvParams:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in "abcd":
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ParameterError(f"{name} must be a finite non-negative number, got {v}")

    @property
    def fixed_point(self) -> tuple[float, float]:
        return self.c / self.d, self.a / self.b


@dataclass
class LvTrajectory:
    times: np.ndarray  # [n]
    states: np.ndarray  # [n, 2]
    features: np.ndarray | None = None  # [n, 2]


def lv_deriv(p: LvParams, s) -> tuple[float, float]:
    w1, w2 = s
    return w1 * (p.a - p.b * w2), w2 * (-p.c + p.d * w1)


def _n_steps(dt: float, t_end: float) -> int:
    if not (dt > 0 and t_end > 0):
        raise ParameterError("dt and t_end must be positive")
    if dt > t_end:
        raise ParameterError("dt must not exceed t_end")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ParameterError(f"t_end={t_end} is not a whole number of steps of dt={dt}")
    return n


def rk4_integrate(p: LvParams, s0, dt: float, t_end: float) -> LvTrajectory:
    """Fixed-step classic RK4; aborts with :class:`DomainError` if a population leaves (0, inf)."""
    n = _n_steps(dt, t_end)
    w1, w2 = float(s0[0]), float(s0[1])
    if not (w1 > 0 and w2 > 0):
        raise DomainError(f"initial populations must be positive, got {(w1, w2)}")
    a, b, c, d = p.a, p.b, p.c, p.d
    states = np.empty((n + 1, 2))
    states[0] = w1, w2
    h2 = dt / 2
    for i in range(1, n + 1):
        k1x, k1y = w1 * (a - b * w2), w2 * (d * w1 - c)
        x, y = w1 + h2 * k1x, w2 + h2 * k1y
        k2x, k2y = x * (a - b * y), y * (d * x - c)
        x, y = w1 + h2 * k2x, w2 + h2 * k2y
        k3x, k3y = x * (a - b * y), y * (d * x - c)
        x, y = w1 + dt * k3x, w2 + dt * k3y
        k4x, k4y = x * (a - b * y), y * (d * x - c)
        w1 += dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        w2 += dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if not (w1 > 0 and w2 > 0 and math.isfinite(w1) and math.isfinite(w2)):
            raise DomainError(f"non-positive or non-finite state {(w1, w2)} at step {i} (t={i * dt:g})")
        states[i] = w1, w2
    return LvTrajectory(np.arange(n + 1) * dt, states)


def lv_first_integral(p: LvParams, s) -> float:
    """V = d W1 - c ln W1 + b W2 - a ln W2, constant along exact orbits."""
    w1, w2 = s
    if not (w1 > 0 and w2 > 0):
        raise DomainError(f"populations must be positive, got {(w1, w2)}")
    return p.d * w1 - p.c * math.log(w1) + p.b * w2 - p.a * math.log(w2)


def first_integral_series(p: LvParams, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    if np.any(states <= 0):
        raise DomainError("populations must be positive")
    w1, w2 = states[:, 0], states[:, 1]
    return p.d * w1 - p.c * np.log(w1) + p.b * w2 - p.a * np.log(w2)


def decoupled_solution(p: LvParams, s0, t) -> tuple[float, float] | np.ndarray:
    """(W1(0) e^{a t}, W2(0) e^{-c t}); vector ``t`` gives an [n, 2] array."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ParameterError("t must be >= 0")
    w1 = s0[0] * np.exp(p.a * t_arr)
    w2 = s0[1] * np.exp(-p.c * t_arr)
    if t_arr.ndim == 0:
        return float(w1), float(w2)
    return np.stack([w1, w2], axis=-1)


def decoupled_trajectory(p: LvParams, s0, dt: float, t_end: float) -> LvTrajectory:
    times = np.arange(_n_steps(dt, t_end) + 1) * dt
    return LvTrajectory(times, decoupled_solution(p, s0, times))


def feature_trajectory(T, traj: LvTrajectory) -> np.ndarray:
    """Per time point (f1, f2) = T (W1, W2)."""
    T = np.asarray(T, dtype=np.float64)
    if T.shape != (2, 2) or not np.all(np.isfinite(T)):
        raise ParameterError("feature map must be a finite 2x2 matrix")
    return traj.states @ T.T


def write_trajectory_csv(path, p: LvParams, traj: LvTrajectory, T) -> None:
    feats = feature_trajectory(T, traj)
    v = first_integral_series(p, traj.states)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "W1", "W2", "f1", "f2", "V"])
        for i in range(len(traj.times)):
            w.writerow([repr(float(x)) for x in (traj.times[i], *traj.states[i], *feats[i], v[i])])
