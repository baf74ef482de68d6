import pytest

from drumsep import config as cfgmod
from drumsep.errors import ConfigError, FileFormatError


def test_paper_defaults():
    cfg = cfgmod.resolve_config("paper")
    assert cfg["stft"] == {"window_length": 4096, "hop": 1024}
    assert cfg["model"]["bands"] == 2048 and cfg["model"]["frames"] == 512
    assert cfg["train"]["lr"] == 1e-4
    assert cfg["train"]["batch"] == 24
    assert cfg["train"]["iterations"] == 100000
    assert cfg["nmf"]["iterations"] == 200
    assert cfg["wiener"]["alpha"] == 1.0


def test_desk_preset_overrides():
    cfg = cfgmod.resolve_config("desk")
    assert cfg["stft"] == {"window_length": 1024, "hop": 256}
    assert cfg["model"]["bands"] == 256 and cfg["model"]["frames"] == 128
    assert cfg["train"]["augment"] is False
    assert cfg["train"]["batch"] == 2


def test_unknown_preset_and_keys():
    with pytest.raises(ConfigError):
        cfgmod.resolve_config("laptop")
    with pytest.raises(ConfigError):
        cfgmod.resolve_config("paper", overrides={"sftt": {}})
    with pytest.raises(ConfigError):
        cfgmod.resolve_config("paper", overrides={"stft": {"window": 2048}})
    with pytest.raises(ConfigError):
        cfgmod.resolve_config("paper", overrides={"stft": 5})


def test_file_then_flags_precedence(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("train:\n  lr: 0.01\n  batch: 4\n")
    cfg = cfgmod.resolve_config("paper", str(path))
    assert cfg["train"]["lr"] == 0.01 and cfg["train"]["batch"] == 4
    cfg2 = cfgmod.resolve_config("paper", str(path), overrides={"train": {"lr": 0.5}})
    assert cfg2["train"]["lr"] == 0.5  # flag beats file
    assert cfg2["train"]["batch"] == 4  # file beats default


def test_file_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("trian:\n  lr: 0.01\n")
    with pytest.raises(ConfigError):
        cfgmod.resolve_config("paper", str(path))


def test_invalid_yaml_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("train: [unclosed\n")
    with pytest.raises(FileFormatError):
        cfgmod.resolve_config("paper", str(path))
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("42\n")
    with pytest.raises(FileFormatError):
        cfgmod.resolve_config("paper", str(scalar))


def test_typed_views():
    cfg = cfgmod.resolve_config("desk")
    assert cfgmod.stft_config(cfg).window_length == 1024
    assert cfgmod.unet_config(cfg).encoder_channels == (8, 16, 32, 64, 128, 128)
    assert cfgmod.wiener_config(cfg).enabled is True
    tc = cfgmod.train_config(cfg)
    assert tc.augment is None  # desk preset disables augmentation
    paper_tc = cfgmod.train_config(cfgmod.resolve_config("paper"))
    assert paper_tc.augment is not None
    assert cfgmod.nmf_config(cfg).iterations == 200
    assert cfgmod.eval_config(cfg).epsilon == 1e-7
