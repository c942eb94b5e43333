"""Central finite-difference oracle for head gradients (independent of backward())."""

import numpy as np

from akplab.network import forward, sample_losses

H = 1e-5


def mean_loss(net, x, labels, loss_kind):
    probs, _ = forward(net, x)
    return float(np.mean(sample_losses(loss_kind, probs, labels)))


def numeric_grads(net, x, labels, loss_kind, h=H):
    out = []
    for layer in net.layers:
        pair = []
        for arr in (layer.weights, layer.bias):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                up = mean_loss(net, x, labels, loss_kind)
                arr[idx] = orig - h
                down = mean_loss(net, x, labels, loss_kind)
                arr[idx] = orig
                g[idx] = (up - down) / (2 * h)
            pair.append(g)
        out.append(tuple(pair))
    return out


def max_relative_error(analytic, numeric, floor=1e-8):
    """max |a - n| / max(|a|, |n|, floor) over every head parameter."""
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
