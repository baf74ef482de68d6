import numpy as np
import pytest

from conftest import rel_err
from drumsep.errors import ConfigError, ShapeError
from drumsep.unet import NUM_SCALES, STEMS, StemModel, UNetConfig, desk_config, infer_mask

TINY = UNetConfig(bands=64, frames=64, encoder_channels=(2, 2, 2, 2, 2, 2))


def test_config_validation():
    with pytest.raises(ConfigError):
        UNetConfig(bands=100, frames=128)  # not divisible by 64
    with pytest.raises(ConfigError):
        UNetConfig(encoder_channels=(8, 8, 8))  # wrong depth
    d = desk_config()
    assert (d.bands, d.frames) == (256, 128)
    roundtrip = UNetConfig.from_dict(d.to_dict())
    assert roundtrip == d


def test_thirteen_conv_layers():
    model = StemModel("KD", TINY)
    assert len(model.enc_convs) + len(model.dec_convs) + 1 == 13


def test_forward_shape_and_mask_range():
    model = StemModel("SD", TINY, seed=1)
    x = np.abs(np.random.default_rng(0).standard_normal((2, 2, 64, 64))).astype(np.float32)
    mask = model.forward(x, train=True)
    assert mask.shape == x.shape
    assert np.all((mask > 0.0) & (mask < 1.0))


def test_input_shape_rejected():
    model = StemModel("KD", TINY)
    with pytest.raises(ShapeError):
        model.forward(np.zeros((1, 2, 64, 32), dtype=np.float32))
    with pytest.raises(ShapeError):
        infer_mask(model, np.zeros((1, 2, 64, 64), dtype=np.float32))
    with pytest.raises(ConfigError):
        StemModel("XX", TINY)


def test_backward_produces_gradients_for_every_parameter():
    model = StemModel("TT", TINY, seed=2)
    x = np.abs(np.random.default_rng(1).standard_normal((1, 2, 64, 64))).astype(np.float32)
    model.zero_grads()
    mask = model.forward(x, train=True)
    g = model.backward(np.ones_like(mask))
    assert g.shape == x.shape
    grads = model.named_grads()
    assert set(grads) == set(model.named_params())
    # every layer's weight receives some gradient signal
    for name, arr in grads.items():
        if name.endswith(".weight") or name.endswith(".gamma"):
            assert np.any(arr != 0), f"no gradient reached {name}"


def test_whole_model_gradient_check():
    """FD check of d(loss)/d(bias) through the full network in float64."""
    cfg = UNetConfig(bands=64, frames=64, encoder_channels=(1, 1, 1, 1, 1, 1))
    model = StemModel("HH", cfg, seed=3, dtype=np.float64)
    rng = np.random.default_rng(4)
    x = np.abs(rng.standard_normal((1, 2, 64, 64)))
    r = rng.standard_normal((1, 2, 64, 64))

    def loss():
        return float(np.sum(model.forward(x, train=True) * r))

    model.forward(x, train=True)
    model.zero_grads()
    model.backward(r)
    h = 1e-6
    checked = 0
    for name in ("final.bias", "dec3.bias", "enc0.bias", "input_bn.beta"):
        p = model.named_params()[name]
        g = model.named_grads()[name]
        for idx in range(min(p.size, 2)):
            orig = p.flat[idx]
            p.flat[idx] = orig + h
            fp = loss()
            p.flat[idx] = orig - h
            fm = loss()
            p.flat[idx] = orig
            fd = (fp - fm) / (2 * h)
            assert abs(g.flat[idx] - fd) <= 1e-4 * max(abs(fd), 1e-6), name
            checked += 1
    assert checked >= 6


def test_save_load_roundtrip_identical_forward(tmp_path):
    model = StemModel("CY", TINY, seed=5)
    model.running_stats_touch = None
    x = np.abs(np.random.default_rng(2).standard_normal((1, 2, 64, 64))).astype(np.float32)
    model.forward(x, train=True)  # move running stats off init
    before = model.forward(x, train=False)
    path = tmp_path / "model.ckpt"
    model.save(path)
    loaded = StemModel.load(path)
    assert loaded.stem == "CY"
    after = loaded.forward(x, train=False)
    np.testing.assert_array_equal(before, after)


def test_per_stem_independence():
    """Models for different stems act independently on the same input."""
    a = StemModel("KD", TINY, seed=10)
    b = StemModel("SD", TINY, seed=11)
    x = np.abs(np.random.default_rng(3).standard_normal((1, 2, 64, 64))).astype(np.float32)
    ma1 = a.forward(x, train=False)
    b.forward(x * 2.0, train=False)  # exercising b must not disturb a
    ma2 = a.forward(x, train=False)
    np.testing.assert_array_equal(ma1, ma2)


def test_stems_tuple():
    assert STEMS == ("KD", "SD", "TT", "HH", "CY")
    assert NUM_SCALES == 6
