"""Frozen-extractor classifier with a three-layer dense head.

Head layers 1 and 2 carry hot-swappable activations; layer 3 is always
softmax over two classes. All reductions over a batch are means.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .core_math import GlorotNormal, Initializer, Prng, init_tensor
from .errors import LabelError, NumericError, ShapeError, UsageError

EPS = 1e-7


class ActivationKind(str, enum.Enum):
    TANH = "tanh"
    SOFTPLUS = "softplus"
    RELU = "relu"
    SOFTMAX = "softmax"

    @classmethod
    def parse(cls, value) -> "ActivationKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class LossKind(str, enum.Enum):
    POISSON = "poisson"
    KL_DIVERGENCE = "kl_divergence"
    SPARSE_CATEGORICAL_CE = "sparse_categorical_ce"
    BINARY_CE = "binary_ce"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        aliases = {"kld": "kl_divergence", "kldivergence": "kl_divergence", "scce": "sparse_categorical_ce",
                   "bce": "binary_ce"}
        v = str(value).lower()
        return cls(aliases.get(v, v))


def activate(kind: ActivationKind, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if kind is ActivationKind.TANH:
        return np.tanh(x)
    if kind is ActivationKind.SOFTPLUS:
        # x + log1p(exp(-x)) for x > 0 avoids overflow
        return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))
    if kind is ActivationKind.RELU:
        return np.maximum(x, 0.0)
    raise UsageError("softmax is a vector operation; use softmax()")


def activate_grad(kind: ActivationKind, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if kind is ActivationKind.TANH:
        return 1.0 - np.tanh(x) ** 2
    if kind is ActivationKind.SOFTPLUS:
        return _sigmoid(x)
    if kind is ActivationKind.RELU:
        return (x > 0).astype(np.float64)
    raise UsageError("softmax is a vector operation; use softmax()")


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softmax(z) -> np.ndarray:
    """Row-wise softmax (max-subtracted). Accepts a vector or an [n, k] matrix."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax input contains non-finite values")
    shifted = z - z.max(axis=-1, keepdims=True) if z.size else z
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (not np.issubdtype(labels.dtype, np.integer) and not np.all(labels == np.round(labels))):
        raise LabelError("labels must be integers")
    labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k or labels.max() > 1):
        raise LabelError(f"labels must lie in {{0, 1}}, got {np.unique(labels).tolist()}")
    return labels


def _onehot(labels: np.ndarray, k: int) -> np.ndarray:
    y = np.zeros((labels.size, k))
    y[np.arange(labels.size), labels] = 1.0
    return y


def sample_losses(kind: LossKind, probs, labels) -> np.ndarray:
    """Per-sample losses for probability rows ``probs`` [n, k]."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = _check_labels(np.atleast_1d(labels), probs.shape[1])
    p = np.clip(probs, EPS, 1.0)
    rows = np.arange(labels.size)
    if kind in (LossKind.SPARSE_CATEGORICAL_CE, LossKind.BINARY_CE, LossKind.KL_DIVERGENCE):
        # one-hot KL reduces to -ln p[label] (0 ln 0 = 0)
        return -np.log(p[rows, labels])
    if kind is LossKind.POISSON:
        y = _onehot(labels, probs.shape[1])
        return np.mean(p - y * np.log(p), axis=1)
    raise UsageError(f"unknown loss {kind!r}")


def loss(kind: LossKind, probs, label) -> float:
    """Loss for one probability vector, or the batch mean for a matrix."""
    return float(np.mean(sample_losses(kind, probs, label)))


def loss_grad(kind: LossKind, probs, label) -> np.ndarray:
    """Gradient of the per-sample loss w.r.t. the pre-softmax logits."""
    probs_arr = np.asarray(probs, dtype=np.float64)
    p2 = np.atleast_2d(probs_arr)
    labels = _check_labels(np.atleast_1d(label), p2.shape[1])
    y = _onehot(labels, p2.shape[1])
    if kind in (LossKind.SPARSE_CATEGORICAL_CE, LossKind.BINARY_CE, LossKind.KL_DIVERGENCE):
        g = p2 - y
    elif kind is LossKind.POISSON:
        k = p2.shape[1]
        inside = p2 >= EPS
        dlog = np.where(inside, 1.0 / np.where(inside, p2, 1.0), 0.0)
        dp = (inside.astype(np.float64) - y * dlog) / k
        # chain through softmax: dz = p * (dp - <dp, p>)
        g = p2 * (dp - np.sum(dp * p2, axis=1, keepdims=True))
    else:
        raise UsageError(f"unknown loss {kind!r}")
    return g.reshape(probs_arr.shape) if probs_arr.ndim == 1 else g


@dataclass
class DenseLayer:
    weights: np.ndarray  # [out, in]
    bias: np.ndarray  # [out]
    activation: ActivationKind

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"inconsistent layer shapes {self.weights.shape} / {self.bias.shape}")


@dataclass
class ForwardCache:
    version: int
    features: np.ndarray
    pre: list  # z1, z2, z3
    post: list  # a1, a2, probs
    activations: tuple


class Network:
    """Frozen linear extractor [d_feat, d_in] followed by three dense layers."""

    def __init__(self, extractor: np.ndarray, layers: list[DenseLayer]):
        if len(layers) != 3:
            raise ShapeError("the head has exactly three dense layers")
        if layers[2].activation is not ActivationKind.SOFTMAX or layers[2].weights.shape[0] != 2:
            raise ShapeError("layer 3 must be a 2-unit softmax layer")
        for layer in layers[:2]:
            if layer.activation is ActivationKind.SOFTMAX:
                raise UsageError("softmax may only occupy the final layer")
        widths_in = [extractor.shape[0]] + [l.weights.shape[0] for l in layers[:2]]
        for layer, w_in in zip(layers, widths_in):
            if layer.weights.shape[1] != w_in:
                raise ShapeError(f"layer expects {layer.weights.shape[1]} inputs, previous width is {w_in}")
        self.extractor = extractor
        self.extractor.setflags(write=False)
        self.layers = layers
        self.version = 0

    @property
    def d_in(self) -> int:
        return self.extractor.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.bias])
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        if len(params) != 6:
            raise ShapeError("expected 6 head parameter arrays")
        for i, layer in enumerate(self.layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise ShapeError("parameter shape changed")
            layer.weights, layer.bias = w, b
        self.version += 1

    def set_hidden_activation(self, kind: ActivationKind) -> None:
        kind = ActivationKind.parse(kind)
        if kind is ActivationKind.SOFTMAX:
            raise UsageError("softmax may only occupy the final layer")
        for layer in self.layers[:2]:
            layer.activation = kind
        self.version += 1

    def extract(self, batch) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.d_in:
            raise ShapeError(f"batch must be [n, {self.d_in}], got {batch.shape}")
        return batch @ self.extractor.T

    def copy(self) -> "Network":
        layers = [DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers]
        return Network(self.extractor, layers)


def build_network(d_in: int, d_feat: int, widths=(64, 32), *, extractor_seed: int, head_seed: int,
                  first_layer_init: Initializer = GlorotNormal(),
                  hidden_activation=ActivationKind.TANH) -> Network:
    """Extractor is GlorotNormal from ``extractor_seed``; head biases start at zero.

    ``first_layer_init`` applies to head layer 1 only, later layers use GlorotNormal.
    """
    extractor = init_tensor(GlorotNormal(), (d_feat, d_in), d_in, d_feat, Prng(extractor_seed))
    prng = Prng(head_seed)
    sizes = [d_feat, *widths, 2]
    acts = [ActivationKind.parse(hidden_activation)] * 2 + [ActivationKind.SOFTMAX]
    layers = []
    for i in range(3):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        init = first_layer_init if i == 0 else GlorotNormal()
        w = init_tensor(init, (fan_out, fan_in), fan_in, fan_out, prng)
        layers.append(DenseLayer(w, np.zeros(fan_out), acts[i]))
    return Network(extractor, layers)


def forward_features(net: Network, features: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Head forward pass from precomputed extractor features [n, d_feat]."""
    pre, post = [], []
    a = features
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = softmax(z) if layer.activation is ActivationKind.SOFTMAX else activate(layer.activation, z)
        pre.append(z)
        post.append(a)
    cache = ForwardCache(net.version, features, pre, post, tuple(l.activation for l in net.layers))
    return post[-1], cache


def forward(net: Network, batch) -> tuple[np.ndarray, ForwardCache]:
    return forward_features(net, net.extract(batch))


def backward(net: Network, cache: ForwardCache, labels, loss_kind: LossKind) -> list[tuple[np.ndarray, np.ndarray]]:
    """Mean-reduced gradients ``[(dW, db)]`` for the three head layers."""
    if cache.version != net.version:
        raise UsageError("stale forward cache: the network changed since forward()")
    probs = cache.post[-1]
    n = probs.shape[0]
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if n == 0:
        return [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]

    dz = loss_grad(loss_kind, probs, labels) / n
    grads = [None, None, None]
    inputs = [cache.features, cache.post[0], cache.post[1]]
    for i in (2, 1, 0):
        layer = net.layers[i]
        grads[i] = (dz.T @ inputs[i], dz.sum(axis=0))
        if i:
            da = dz @ layer.weights
            dz = da * activate_grad(net.layers[i - 1].activation, cache.pre[i - 1])
    return grads


def predict_from_probs(probs) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to class 0
    return np.argmax(np.atleast_2d(probs), axis=1)


def predict(net: Network, x) -> np.ndarray | int:
    """Predicted class per row; a single 1-D input returns an int."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    probs, _ = forward(net, np.atleast_2d(x))
    classes = predict_from_probs(probs)
    return int(classes[0]) if single else classes


def checkpoint_dict(net: Network, meta: dict) -> dict:
    return {
        "extractor": net.extractor.tolist(),
        "layers": [{"w": l.weights.tolist(), "b": l.bias.tolist(), "activation": l.activation.value}
                   for l in net.layers],
        "meta": meta,
    }


def network_from_checkpoint(doc: dict) -> Network:
    layers = []
    for entry in doc["layers"]:
        w = np.array(entry["w"], dtype=np.float64).reshape(len(entry["w"]), -1)
        layers.append(DenseLayer(w, np.array(entry["b"], dtype=np.float64), ActivationKind.parse(entry["activation"])))
    extractor = np.array(doc["extractor"], dtype=np.float64).reshape(len(doc["extractor"]), -1)
    return Network(extractor, layers)


def save_checkpoint(path, net: Network, meta: dict) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(net, meta), fh)


def load_checkpoint(path) -> tuple[Network, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    return network_from_checkpoint(doc), doc.get("meta", {})
