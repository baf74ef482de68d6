"""Layered run configuration: defaults <- preset <- YAML file <- CLI flags.

The schema is a nested dict; unknown keys at any level are rejected so a
typo in a config file fails loudly instead of silently using a default.
"""

from __future__ import annotations

import copy
from typing import Any, Dict, Optional

import yaml

from .augment import AugmentConfig
from .errors import ConfigError, FileFormatError
from .evaluate import EvalConfig
from .nmf import NmfdConfig
from .stft import StftConfig
from .train import TrainConfig
from .unet import UNetConfig, desk_config
from .wiener import WienerConfig

# full-scale defaults
_DEFAULTS: Dict[str, Any] = {
    "preset": "paper",
    "stft": {"window_length": 4096, "hop": 1024},
    "model": {"bands": 2048, "frames": 512,
              "encoder_channels": [32, 64, 128, 256, 512, 512]},
    "wiener": {"alpha": 1.0, "epsilon": 1e-7, "enabled": True},
    "train": {"lr": 1e-4, "batch": 24, "iterations": 100000, "seed": 0,
              "checkpoint_every": 1000, "augment": True},
    "nmf": {"iterations": 200, "template_length": 10, "bases_mode": "fixed",
            "seed": 0},
    "eval": {"epsilon": 1e-7},
}

# reduced preset: runs end to end in minutes on one CPU core
_DESK_OVERRIDES: Dict[str, Any] = {
    "stft": {"window_length": 1024, "hop": 256},
    "model": {"bands": 256, "frames": 128,
              "encoder_channels": [8, 16, 32, 64, 128, 128]},
    "train": {"lr": 2e-2, "batch": 2, "iterations": 2000, "checkpoint_every": 500,
              "augment": False},
}

PRESETS = ("paper", "desk")


def _merge(base: Dict[str, Any], update: Dict[str, Any], path: str = ""):
    for key, value in update.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            _merge(base[key], value, where)
        else:
            base[key] = value


def resolve_config(preset: str = "paper", file_path: Optional[str] = None,
                   overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Defaults, then preset, then the YAML file, then explicit overrides."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    cfg = copy.deepcopy(_DEFAULTS)
    cfg["preset"] = preset
    if preset == "desk":
        _merge(cfg, copy.deepcopy(_DESK_OVERRIDES))
    if file_path:
        with open(file_path) as fh:
            try:
                loaded = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise FileFormatError(f"{file_path}: invalid YAML ({exc})")
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise FileFormatError(f"{file_path}: top level must be a mapping")
        _merge(cfg, loaded)
    if overrides:
        _merge(cfg, overrides)
    return cfg


# -- typed views --------------------------------------------------------------


def stft_config(cfg: Dict[str, Any]) -> StftConfig:
    return StftConfig(window_length=int(cfg["stft"]["window_length"]),
                      hop=int(cfg["stft"]["hop"]))


def unet_config(cfg: Dict[str, Any]) -> UNetConfig:
    m = cfg["model"]
    return UNetConfig(bands=int(m["bands"]), frames=int(m["frames"]),
                      encoder_channels=tuple(int(c) for c in m["encoder_channels"]))


def wiener_config(cfg: Dict[str, Any]) -> WienerConfig:
    w = cfg["wiener"]
    return WienerConfig(alpha=float(w["alpha"]), epsilon=float(w["epsilon"]),
                        enabled=bool(w["enabled"]))


def train_config(cfg: Dict[str, Any]) -> TrainConfig:
    t = cfg["train"]
    augment = AugmentConfig(seed=int(t["seed"])) if t["augment"] else None
    return TrainConfig(lr=float(t["lr"]), batch=int(t["batch"]),
                       iterations=int(t["iterations"]), seed=int(t["seed"]),
                       checkpoint_every=int(t["checkpoint_every"]), augment=augment)


def nmf_config(cfg: Dict[str, Any]) -> NmfdConfig:
    n = cfg["nmf"]
    return NmfdConfig(iterations=int(n["iterations"]),
                      template_length=int(n["template_length"]),
                      bases_mode=str(n["bases_mode"]), seed=int(n["seed"]))


def eval_config(cfg: Dict[str, Any]) -> EvalConfig:
    return EvalConfig(epsilon=float(cfg["eval"]["epsilon"]))
