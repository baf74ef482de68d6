import numpy as np
import pytest

from conftest import (
    check_layer_gradients,
    naive_conv2d,
    naive_conv_transpose2d,
    numeric_grad,
    rel_err,
)
from drumsep.errors import ConfigError, ShapeError, StateError
from drumsep.nn import (
    Activation,
    Conv2d,
    ConvSpec,
    ConvTranspose2d,
    FreqBatchNorm,
    l1_loss,
    l1_loss_grad,
)
from drumsep.nn.layers import conv_out_size, conv_transpose_out_size


def f64_conv(in_ch, spec, seed=0):
    cls = ConvTranspose2d if spec.transposed else Conv2d
    return cls(in_ch, spec, rng=np.random.default_rng(seed), dtype=np.float64)


# -- spec validation ----------------------------------------------------------


def test_conv_spec_validation():
    with pytest.raises(ConfigError):
        ConvSpec(0)
    with pytest.raises(ConfigError):
        ConvSpec(4, stride=(0, 1))
    with pytest.raises(ConfigError):
        ConvSpec(4, padding=(-1, 0))
    with pytest.raises(ConfigError):
        ConvSpec(4, transposed=True, stride=(2, 2), out_padding=(2, 0))
    with pytest.raises(ConfigError):
        Conv2d(2, ConvSpec(4, transposed=True))
    with pytest.raises(ConfigError):
        ConvTranspose2d(2, ConvSpec(4))


def test_output_size_formulas():
    # strided 5x5 conv with padding 2 halves (rounding down)
    assert conv_out_size(16, 5, 2, 2, 1) == 8
    assert conv_out_size(17, 5, 2, 2, 1) == 9
    # transposed with out_padding 1 exactly doubles
    assert conv_transpose_out_size(8, 5, 2, 2, 1, 1) == 16
    # final layer: kernel 4, stride 1, dilation 2, padding 3 preserves size
    assert conv_transpose_out_size(16, 4, 1, 3, 2, 0) == 16


# -- forward oracles ----------------------------------------------------------


@pytest.mark.parametrize("stride,padding,dilation", [
    ((1, 1), (0, 0), (1, 1)),
    ((2, 2), (2, 2), (1, 1)),
    ((1, 2), (1, 0), (1, 1)),
    ((1, 1), (3, 3), (2, 2)),
])
def test_conv2d_forward_matches_naive(stride, padding, dilation):
    rng = np.random.default_rng(1)
    spec = ConvSpec(3, kernel=(3, 3), stride=stride, padding=padding, dilation=dilation)
    layer = f64_conv(2, spec)
    layer.params["bias"][:] = rng.standard_normal(3)
    x = rng.standard_normal((2, 2, 9, 8))
    got = layer.forward(x)
    ref = naive_conv2d(x, layer.params["weight"], layer.params["bias"],
                       stride, padding, dilation)
    assert rel_err(got, ref) < 1e-13


@pytest.mark.parametrize("stride,padding,dilation,out_padding", [
    ((1, 1), (0, 0), (1, 1), (0, 0)),
    ((2, 2), (2, 2), (1, 1), (1, 1)),
    ((1, 1), (3, 3), (2, 2), (0, 0)),  # the final-layer geometry
    ((2, 1), (1, 1), (1, 1), (1, 0)),
])
def test_conv_transpose2d_forward_matches_naive(stride, padding, dilation, out_padding):
    rng = np.random.default_rng(2)
    spec = ConvSpec(2, kernel=(4, 4), stride=stride, padding=padding,
                    dilation=dilation, transposed=True, out_padding=out_padding)
    layer = f64_conv(3, spec)
    layer.params["bias"][:] = rng.standard_normal(2)
    x = rng.standard_normal((2, 3, 6, 7))
    got = layer.forward(x)
    ref = naive_conv_transpose2d(x, layer.params["weight"], layer.params["bias"],
                                 stride, padding, dilation, out_padding)
    assert rel_err(got, ref) < 1e-13


def test_conv_and_transpose_are_adjoint():
    """<conv(x), y> == <x, conv_T(y)> when they share the same weight."""
    rng = np.random.default_rng(3)
    spec = ConvSpec(4, kernel=(5, 5), stride=(2, 2), padding=(2, 2))
    conv = f64_conv(3, spec)
    tspec = ConvSpec(3, kernel=(5, 5), stride=(2, 2), padding=(2, 2),
                     transposed=True, out_padding=(1, 1))
    tconv = f64_conv(4, tspec)
    # conv weight (out=4, in=3, kh, kw) == transpose layout (in=4, out=3, kh, kw)
    tconv.params["weight"][:] = conv.params["weight"]
    tconv.params["bias"][:] = 0.0

    x = rng.standard_normal((2, 3, 16, 16))
    y = rng.standard_normal((2, 4, 8, 8))
    lhs = np.sum(conv.forward(x) * y) - np.sum(conv.params["bias"][None, :, None, None] * y)
    rhs = np.sum(x * tconv.forward(y))
    assert abs(lhs - rhs) / abs(lhs) < 1e-13


# -- gradient checks ----------------------------------------------------------


def test_conv2d_gradients():
    rng = np.random.default_rng(4)
    spec = ConvSpec(2, kernel=(3, 3), stride=(2, 2), padding=(1, 1))
    layer = f64_conv(2, spec, seed=4)
    x = rng.standard_normal((2, 2, 6, 6))
    assert check_layer_gradients(layer, x, rng) < 1e-6


def test_conv_transpose2d_gradients():
    rng = np.random.default_rng(5)
    spec = ConvSpec(2, kernel=(3, 3), stride=(2, 2), padding=(1, 1),
                    transposed=True, out_padding=(1, 1))
    layer = f64_conv(3, spec, seed=5)
    x = rng.standard_normal((2, 3, 5, 5))
    assert check_layer_gradients(layer, x, rng) < 1e-6


def test_final_layer_geometry_gradients():
    rng = np.random.default_rng(6)
    spec = ConvSpec(2, kernel=(4, 4), stride=(1, 1), padding=(3, 3),
                    dilation=(2, 2), transposed=True)
    layer = f64_conv(2, spec, seed=6)
    x = rng.standard_normal((1, 2, 8, 8))
    out = layer.forward(x)
    assert out.shape == (1, 2, 8, 8)  # shape-preserving
    assert check_layer_gradients(layer, x, rng) < 1e-6


def test_freq_batchnorm_train_statistics_and_gradients():
    rng = np.random.default_rng(7)
    bn = FreqBatchNorm(5, dtype=np.float64)
    x = rng.standard_normal((3, 2, 5, 7)) * 3.0 + 1.0
    out = bn.forward(x, train=True)
    # normalized per band over (batch, channel, time)
    assert np.allclose(out.mean(axis=(0, 1, 3)), 0.0, atol=1e-12)
    assert np.allclose(out.var(axis=(0, 1, 3)), 1.0, atol=1e-4)
    # running stats moved toward the batch stats with momentum 0.1
    n = 3 * 2 * 7
    expect_mean = 0.1 * x.mean(axis=(0, 1, 3))
    expect_var = 0.9 * 1.0 + 0.1 * x.var(axis=(0, 1, 3)) * n / (n - 1)
    assert np.allclose(bn.running_mean, expect_mean, atol=1e-12)
    assert np.allclose(bn.running_var, expect_var, atol=1e-12)

    bn.params["gamma"][:] = rng.uniform(0.5, 2.0, 5)
    bn.params["beta"][:] = rng.standard_normal(5)
    assert check_layer_gradients(bn, x, rng) < 1e-6


def test_freq_batchnorm_eval_uses_running_stats():
    bn = FreqBatchNorm(4, dtype=np.float64)
    bn.running_mean[:] = [1, 2, 3, 4]
    bn.running_var[:] = [1, 4, 9, 16]
    x = np.ones((1, 1, 4, 2))
    out = bn.forward(x, train=False)
    expected = (1.0 - np.array([1, 2, 3, 4])) / np.sqrt(np.array([1, 4, 9, 16]) + 1e-5)
    assert np.allclose(out[0, 0, :, 0], expected, atol=1e-7)


def test_freq_batchnorm_shape_error():
    bn = FreqBatchNorm(4)
    with pytest.raises(ShapeError):
        bn.forward(np.zeros((1, 1, 5, 2)))


@pytest.mark.parametrize("kind", ["relu", "leaky-relu", "sigmoid", "tanh"])
def test_activation_gradients(kind):
    rng = np.random.default_rng(8)
    act = Activation(kind)
    # keep values away from the relu kink so FD is valid
    x = rng.standard_normal((3, 2, 4, 4))
    x[np.abs(x) < 1e-3] = 0.5
    assert check_layer_gradients(act, x, rng) < 1e-6


def test_activation_values():
    act = Activation("leaky-relu", slope=0.2)
    x = np.array([[-2.0, 3.0]])
    np.testing.assert_allclose(act.forward(x), [[-0.4, 3.0]])
    sig = Activation("sigmoid")
    np.testing.assert_allclose(sig.forward(np.array([0.0])), [0.5])
    # stable at extreme inputs, no overflow warnings
    with np.errstate(over="raise"):
        out = sig.forward(np.array([-1e4, 1e4]))
    np.testing.assert_allclose(out, [0.0, 1.0])
    with pytest.raises(ConfigError):
        Activation("swish")


def test_backward_before_forward_is_state_error():
    layer = Conv2d(1, ConvSpec(1, kernel=(3, 3)))
    with pytest.raises(StateError):
        layer.backward(np.zeros((1, 1, 4, 4)))


def test_l1_loss_and_subgradient():
    pred = np.array([1.0, -2.0, 0.5, 3.0])
    target = np.array([0.0, -2.0, 1.5, 1.0])
    assert l1_loss(pred, target) == pytest.approx(1.0 + 0.0 + 1.0 + 2.0)
    np.testing.assert_array_equal(l1_loss_grad(pred, target), [1.0, 0.0, -1.0, 1.0])
    with pytest.raises(ShapeError):
        l1_loss(pred, target[:2])


def test_l1_loss_gradient_fd():
    rng = np.random.default_rng(9)
    pred = rng.standard_normal(20)
    target = rng.standard_normal(20)
    g = l1_loss_grad(pred, target)
    gn = numeric_grad(lambda: l1_loss(pred, target), pred)
    assert rel_err(g, gn) < 1e-8


def test_l1_loss_nonnegative_zero_iff_equal():
    x = np.random.default_rng(10).standard_normal(30)
    assert l1_loss(x, x) == 0.0
    assert l1_loss(x, x + 1e-9) > 0.0
