"""Deterministic numeric foundation: seeded PRNG, weight initializers, matmul.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 (C order, so the
flat buffer is row-major).

PRNG stream (bit-exact, reproducible in any language)::

    state <- (state + 0x9E3779B97F4A7C15) mod 2**64
    z <- state
    z <- ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z <- ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    out <- z ^ (z >> 31)
    uniform <- (out >> 11) * 2**-53            # in [0, 1)

Normals come from Box-Muller on consecutive uniform pairs (u1, u2)::

    r = sqrt(-2 ln(1 - u1)),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2)

emitted in the order z0, z1, z0', z1', ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ParameterError, ShapeError

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64_mix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *labels: int) -> int:
    """Mix a base seed with integer labels into an independent 64-bit seed."""
    s = seed & MASK64
    for label in labels:
        s = splitmix64_mix((s + GAMMA * (int(label) + 1)) & MASK64)
    return s


class Prng:
    """splitmix64 generator. Single-owner: fork with :func:`derive_seed` instead of sharing."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return splitmix64_mix(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def next_u64_array(self, n: int) -> np.ndarray:
        """``n`` consecutive outputs, identical to ``n`` calls of :meth:`next_u64`."""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return z

    def uniform_array(self, n: int) -> np.ndarray:
        bits = self.next_u64_array(n) >> np.uint64(11)
        return bits.astype(np.float64) * 2.0**-53

    def normal_array(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform_array(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(2.0 * math.pi * u2)
        out[1::2] = r * np.sin(2.0 * math.pi * u2)
        return out[:n]

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform_array(n), kind="stable")

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        """Integers uniform on [low, high)."""
        return low + np.floor(self.uniform_array(n) * (high - low)).astype(np.int64)


@dataclass(frozen=True)
class Zeros:
    name = "zeros"


@dataclass(frozen=True)
class GlorotNormal:
    name = "glorot_normal"


@dataclass(frozen=True)
class HeUniform:
    name = "he_uniform"


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float = 0.0
    std: float = 0.05
    name = "truncated_normal"

    def __post_init__(self):
        if not self.std > 0:
            raise ParameterError(f"TruncatedNormal std must be > 0, got {self.std}")


@dataclass(frozen=True)
class UniformRandom:
    low: float
    high: float
    name = "uniform_random"

    def __post_init__(self):
        if not self.low < self.high:
            raise ParameterError(f"UniformRandom needs low < high, got [{self.low}, {self.high})")


Initializer = Union[Zeros, GlorotNormal, HeUniform, TruncatedNormal, UniformRandom]


def parse_initializer(spec) -> Initializer:
    """Build an initializer from a name or ``{"kind": ..., **params}`` mapping."""
    if isinstance(spec, (Zeros, GlorotNormal, HeUniform, TruncatedNormal, UniformRandom)):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParameterError(f"cannot parse initializer {spec!r}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    kind = spec["kind"].lower().replace("-", "_")
    table = {
        "zeros": Zeros,
        "glorot_normal": GlorotNormal,
        "glorotnormal": GlorotNormal,
        "he_uniform": HeUniform,
        "heuniform": HeUniform,
        "truncated_normal": TruncatedNormal,
        "truncatednormal": TruncatedNormal,
        "uniform_random": UniformRandom,
        "uniform": UniformRandom,
    }
    if kind not in table:
        raise ParameterError(f"unknown initializer {spec['kind']!r}")
    try:
        return table[kind](**params)
    except TypeError as exc:
        raise ParameterError(str(exc)) from None


def initializer_to_dict(init: Initializer) -> dict:
    out = {"kind": init.name}
    if isinstance(init, TruncatedNormal):
        out.update(mean=init.mean, std=init.std)
    elif isinstance(init, UniformRandom):
        out.update(low=init.low, high=init.high)
    return out


def init_tensor(kind: Initializer, shape: Sequence[int], fan_in: int, fan_out: int, prng: Prng) -> np.ndarray:
    if fan_in < 1 or fan_out < 1:
        raise ParameterError("fan_in and fan_out must be >= 1")
    shape = tuple(int(s) for s in shape)
    n = int(np.prod(shape)) if shape else 1

    if isinstance(kind, Zeros):
        data = np.zeros(n)
    elif isinstance(kind, GlorotNormal):
        data = prng.normal_array(n) * math.sqrt(2.0 / (fan_in + fan_out))
    elif isinstance(kind, HeUniform):
        limit = math.sqrt(6.0 / fan_in)
        data = prng.uniform_array(n) * (2 * limit) - limit
    elif isinstance(kind, TruncatedNormal):
        data = _truncated_normal(n, kind.mean, kind.std, prng)
    elif isinstance(kind, UniformRandom):
        data = kind.low + prng.uniform_array(n) * (kind.high - kind.low)
    else:
        raise ParameterError(f"unsupported initializer {kind!r}")
    return data.reshape(shape)


def _truncated_normal(n: int, mean: float, std: float, prng: Prng) -> np.ndarray:
    # rejection at mean +- 2 std; redraws consume the stream in index order
    lo, hi = mean - 2 * std, mean + 2 * std
    data = mean + std * prng.normal_array(n)
    bad = np.flatnonzero((data < lo) | (data > hi))
    while bad.size:
        data[bad] = mean + std * prng.normal_array(bad.size)
        bad = bad[(data[bad] < lo) | (data[bad] > hi)]
    return data


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner extents differ: {a.shape} x {b.shape}")
    return a @ b
