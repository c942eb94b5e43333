import numpy as np
import pytest

from akplab.core_math import Prng
from akplab.errors import LabelError, NumericError, ShapeError, UsageError
from akplab.network import (ActivationKind, DenseLayer, LossKind, Network, activate, activate_grad, backward,
                            build_network, forward, load_checkpoint, loss, loss_grad, predict, predict_from_probs,
                            sample_losses, save_checkpoint, softmax)

from gradcheck import max_relative_error, numeric_grads

HIDDEN = [ActivationKind.TANH, ActivationKind.SOFTPLUS, ActivationKind.RELU]


def small_net(act=ActivationKind.TANH, d_in=8, widths=(6, 5), seed=2):
    return build_network(d_in, 8, widths, extractor_seed=1, head_seed=seed, hidden_activation=act)


def test_activation_examples():
    assert activate(ActivationKind.SOFTPLUS, 0.0) == pytest.approx(np.log(2), abs=1e-12)
    assert activate(ActivationKind.TANH, 0.0) == 0.0
    assert activate(ActivationKind.RELU, -2.0) == 0.0
    assert activate(ActivationKind.RELU, 3.0) == 3.0
    # ln(1 + e^30) = 30 + ln(1 + e^-30) = 30 + 9.357622968840175e-14
    assert abs(activate(ActivationKind.SOFTPLUS, 30.0) - 30.0000000000000936) < 1e-9
    assert np.isfinite(activate(ActivationKind.SOFTPLUS, np.array([800.0, -800.0]))).all()


def test_activation_grad_examples():
    assert activate_grad(ActivationKind.SOFTPLUS, 0.0) == 0.5
    assert activate_grad(ActivationKind.TANH, 0.0) == 1.0
    assert activate_grad(ActivationKind.RELU, 0.0) == 0.0


def test_softmax_rejected_elementwise():
    with pytest.raises(UsageError):
        activate(ActivationKind.SOFTMAX, 1.0)
    with pytest.raises(UsageError):
        activate_grad(ActivationKind.SOFTMAX, 1.0)


def test_softmax_examples():
    assert softmax([0.0, 0.0]).tolist() == [0.5, 0.5]
    z = np.array([0.3, -1.7])
    assert np.allclose(softmax(z + 10), softmax(z), atol=1e-15)
    assert np.allclose(softmax([np.log(1), np.log(3)]), [0.25, 0.75], atol=1e-15)
    big = softmax(Prng(4).normal_array(200).reshape(100, 2) * 50)
    assert np.all(np.abs(big.sum(axis=1) - 1) < 1e-12)
    with pytest.raises(NumericError):
        softmax([np.inf, 0.0])
    with pytest.raises(NumericError):
        softmax([np.nan, 0.0])


def test_loss_examples():
    p = [0.25, 0.75]
    assert loss(LossKind.SPARSE_CATEGORICAL_CE, p, 1) == pytest.approx(0.287682, abs=1e-6)
    assert loss(LossKind.KL_DIVERGENCE, p, 1) == pytest.approx(0.287682, abs=1e-6)
    assert loss(LossKind.BINARY_CE, p, 1) == loss(LossKind.SPARSE_CATEGORICAL_CE, p, 1)
    # mean(0.25 - 0, 0.75 - ln 0.75)
    assert loss(LossKind.POISSON, p, 1) == pytest.approx((0.25 + 0.75 - np.log(0.75)) / 2, abs=1e-12)
    assert loss(LossKind.POISSON, p, 1) == pytest.approx(0.643841, abs=1e-6)


def test_loss_clamps_zero_probability():
    assert loss(LossKind.SPARSE_CATEGORICAL_CE, [1.0, 0.0], 1) == pytest.approx(-np.log(1e-7))


@pytest.mark.parametrize("kind", list(LossKind))
@pytest.mark.parametrize("label", [-1, 2, 0.5])
def test_bad_labels(kind, label):
    with pytest.raises(LabelError):
        loss(kind, [0.5, 0.5], label)
    with pytest.raises(LabelError):
        loss_grad(kind, [0.5, 0.5], label)


def test_loss_grad_examples():
    assert np.allclose(loss_grad(LossKind.SPARSE_CATEGORICAL_CE, [0.25, 0.75], 1), [0.25, -0.25], atol=1e-15)
    assert np.all(loss_grad(LossKind.SPARSE_CATEGORICAL_CE, [0.0, 1.0], 1) == 0)


@pytest.mark.parametrize("kind", list(LossKind))
@pytest.mark.parametrize("z", [[0.4, -0.9], [2.0, 1.5], [-3.0, 3.0]])
def test_loss_grad_finite_difference(kind, z):
    z = np.array(z)
    h = 1e-6
    num = np.array([(loss(kind, softmax(z + h * e), 1) - loss(kind, softmax(z - h * e), 1)) / (2 * h)
                    for e in np.eye(2)])
    ana = loss_grad(kind, softmax(z), 1)
    assert np.max(np.abs(ana - num) / np.maximum(np.abs(num), 1e-8)) < 1e-6


def test_zero_weights_give_uniform_probs():
    net = small_net()
    net.set_params([np.zeros_like(p) for p in net.params()])
    probs, _ = forward(net, np.ones((3, 8)))
    assert np.array_equal(probs, np.full((3, 2), 0.5))


def test_empty_batch():
    net = small_net()
    probs, cache = forward(net, np.zeros((0, 8)))
    assert probs.shape == (0, 2)
    grads = backward(net, cache, np.zeros(0, dtype=int), LossKind.BINARY_CE)
    assert all(np.all(w == 0) and np.all(b == 0) for w, b in grads)


def test_forward_deterministic():
    x = Prng(3).normal_array(40).reshape(5, 8)
    a, _ = forward(small_net(), x)
    b, _ = forward(small_net(), x)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a.sum(axis=1) - 1) < 1e-12)


def test_forward_shape_error():
    with pytest.raises(ShapeError):
        forward(small_net(), np.ones((2, 7)))


@pytest.mark.parametrize("act", HIDDEN)
@pytest.mark.parametrize("kind", list(LossKind))
def test_gradients_match_finite_differences(act, kind):
    net = small_net(act)
    x = Prng(3).normal_array(5 * 8).reshape(5, 8)
    labels = np.array([0, 1, 1, 0, 1])
    _, cache = forward(net, x)
    analytic = backward(net, cache, labels, kind)
    assert max_relative_error(analytic, numeric_grads(net, x, labels, kind)) <= 1e-5


@pytest.mark.parametrize("kind", list(LossKind))
def test_duplicated_sample_gradient(kind):
    net = small_net(ActivationKind.SOFTPLUS)
    x = Prng(8).normal_array(8).reshape(1, 8)
    _, c1 = forward(net, x)
    single = backward(net, c1, np.array([1]), kind)
    _, c2 = forward(net, np.vstack([x, x]))
    double = backward(net, c2, np.array([1, 1]), kind)
    for (w1, b1), (w2, b2) in zip(single, double):
        # under mean reduction the duplicated pair reproduces the single-sample gradient
        # (the summed gradient, 2 * mean, is therefore twice it)
        assert np.allclose(w2, w1, rtol=1e-14, atol=0) and np.allclose(b2, b1, rtol=1e-14, atol=0)


def test_zero_loss_configuration_has_zero_gradient():
    net = small_net()
    # saturate the output layer so probs are one-hot to machine precision
    w3 = np.zeros_like(net.layers[2].weights)
    net.set_params([*net.params()[:4], w3, np.array([-400.0, 400.0])])
    probs, cache = forward(net, np.ones((2, 8)))
    assert np.array_equal(probs, [[0.0, 1.0], [0.0, 1.0]])
    for w, b in backward(net, cache, np.array([1, 1]), LossKind.SPARSE_CATEGORICAL_CE):
        assert np.all(w == 0) and np.all(b == 0)


def test_stale_cache_rejected():
    net = small_net()
    _, cache = forward(net, np.ones((2, 8)))
    net.set_hidden_activation(ActivationKind.RELU)
    with pytest.raises(UsageError):
        backward(net, cache, np.array([0, 1]), LossKind.BINARY_CE)


def test_predict_examples():
    assert predict_from_probs([0.3, 0.7]).tolist() == [1]
    assert predict_from_probs([0.5, 0.5]).tolist() == [0]
    net = small_net()
    x = Prng(6).normal_array(80).reshape(10, 8)
    before = predict(net, x)
    net.layers[2].bias += 10.0  # same constant on both logits
    assert np.array_equal(predict(net, x), before)
    assert predict(net, x[0]) in (0, 1)


def test_softmax_only_in_final_slot():
    net = small_net()
    with pytest.raises(UsageError):
        net.set_hidden_activation(ActivationKind.SOFTMAX)
    layers = [DenseLayer(l.weights, l.bias, l.activation) for l in net.layers]
    layers[2].activation = ActivationKind.TANH
    with pytest.raises(ShapeError):
        Network(net.extractor, layers)


def test_extractor_is_read_only():
    net = small_net()
    with pytest.raises(ValueError):
        net.extractor[0, 0] = 1.0


def test_checkpoint_round_trip(tmp_path):
    net = small_net(ActivationKind.SOFTPLUS)
    net.layers[0].weights[0, 0] = 1 / 3
    save_checkpoint(tmp_path / "c.json", net, {"seed": 5, "config_hash": "abc"})
    back, meta = load_checkpoint(tmp_path / "c.json")
    assert meta == {"seed": 5, "config_hash": "abc"}
    assert np.array_equal(back.extractor, net.extractor)
    for a, b in zip(back.layers, net.layers):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
        assert a.activation is b.activation


def test_sample_losses_batch():
    probs = np.array([[0.25, 0.75], [0.9, 0.1]])
    out = sample_losses(LossKind.SPARSE_CATEGORICAL_CE, probs, [1, 0])
    assert np.allclose(out, [-np.log(0.75), -np.log(0.9)])
