"""Per-stem masking U-Net built from the dense-tensor layers.

The network has 13 convolutional layers: 6 strided encoder convs, 6
transposed decoder convs with skip concatenations, and a final
shape-preserving transposed conv (4x4 kernel, 2x2 dilation, 3x3 padding)
feeding a sigmoid. It maps a nonnegative magnitude patch
(channels x bands x frames) to a soft mask of the same size with entries
in the open interval (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .nn import (
    Activation,
    Conv2d,
    ConvSpec,
    ConvTranspose2d,
    FreqBatchNorm,
    load_tensors,
    save_tensors,
)

STEMS = ("KD", "SD", "TT", "HH", "CY")

NUM_SCALES = 6  # encoder halves each spatial dim this many times


@dataclass(frozen=True)
class UNetConfig:
    bands: int = 2048
    frames: int = 512
    encoder_channels: Tuple[int, ...] = (32, 64, 128, 256, 512, 512)
    in_channels: int = 2
    input_freqbn: bool = True
    leaky_slope: float = 0.2

    def __post_init__(self):
        if len(self.encoder_channels) != NUM_SCALES:
            raise ConfigError(f"expected {NUM_SCALES} encoder widths, "
                              f"got {len(self.encoder_channels)}")
        div = 1 << NUM_SCALES
        if self.bands % div or self.frames % div:
            raise ConfigError(
                f"bands and frames must be divisible by {div} so encoder/decoder "
                f"shapes mirror; got ({self.bands}, {self.frames})")

    def to_dict(self) -> dict:
        return {
            "bands": self.bands,
            "frames": self.frames,
            "encoder_channels": list(self.encoder_channels),
            "in_channels": self.in_channels,
            "input_freqbn": self.input_freqbn,
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        return cls(
            bands=int(d["bands"]),
            frames=int(d["frames"]),
            encoder_channels=tuple(d["encoder_channels"]),
            in_channels=int(d.get("in_channels", 2)),
            input_freqbn=bool(d.get("input_freqbn", True)),
            leaky_slope=float(d.get("leaky_slope", 0.2)),
        )


def desk_config() -> UNetConfig:
    """Reduced preset that trains in minutes on a CPU."""
    return UNetConfig(bands=256, frames=128, encoder_channels=(8, 16, 32, 64, 128, 128))


class StemModel:
    """One U-Net dedicated to a single stem."""

    def __init__(self, stem: str, config: UNetConfig = UNetConfig(),
                 seed: int = 0, dtype=np.float32):
        if stem not in STEMS:
            raise ConfigError(f"unknown stem {stem!r}; expected one of {STEMS}")
        self.stem = stem
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        e = config.encoder_channels

        self.input_bn = FreqBatchNorm(config.bands, dtype=dtype) if config.input_freqbn else None

        self.enc_convs: List[Conv2d] = []
        self.enc_acts: List[Activation] = []
        prev = config.in_channels
        for width in e:
            self.enc_convs.append(Conv2d(prev, ConvSpec(width), rng=rng, dtype=dtype))
            self.enc_acts.append(Activation("leaky-relu", slope=config.leaky_slope))
            prev = width

        # decoder widths mirror the encoder; inputs double where a skip joins
        self.dec_out = [e[4], e[3], e[2], e[1], e[0], e[0]]
        self.dec_convs: List[ConvTranspose2d] = []
        self.dec_acts: List[Activation] = []
        for j, width in enumerate(self.dec_out):
            if j == 0:
                dec_in = e[5]
            else:
                dec_in = self.dec_out[j - 1] + e[5 - j]
            spec = ConvSpec(width, kernel=(5, 5), stride=(2, 2), padding=(2, 2),
                            transposed=True, out_padding=(1, 1))
            self.dec_convs.append(ConvTranspose2d(dec_in, spec, rng=rng, dtype=dtype))
            self.dec_acts.append(Activation("relu"))

        final_spec = ConvSpec(config.in_channels, kernel=(4, 4), stride=(1, 1),
                              padding=(3, 3), dilation=(2, 2), transposed=True)
        self.final_conv = ConvTranspose2d(e[0], final_spec, rng=rng, dtype=dtype)
        # shrink the mask head so no initial logit is saturated: in float32 a
        # |logit| above ~18 rounds the sigmoid output to exactly 0 or 1, where
        # its gradient is exactly zero and the cell is frozen at a random value
        self.final_conv.params["weight"] *= np.asarray(0.01, dtype=dtype)
        self.final_act = Activation("sigmoid")

        self._skip_shapes = None

    # -- parameter plumbing ------------------------------------------------

    def _layer_map(self) -> Dict[str, object]:
        layers = {}
        if self.input_bn is not None:
            layers["input_bn"] = self.input_bn
        for i, conv in enumerate(self.enc_convs):
            layers[f"enc{i}"] = conv
        for j, conv in enumerate(self.dec_convs):
            layers[f"dec{j}"] = conv
        layers["final"] = self.final_conv
        return layers

    def named_params(self) -> Dict[str, np.ndarray]:
        return {f"{ln}.{pn}": p
                for ln, layer in self._layer_map().items()
                for pn, p in layer.params.items()}

    def named_grads(self) -> Dict[str, np.ndarray]:
        return {f"{ln}.{pn}": g
                for ln, layer in self._layer_map().items()
                for pn, g in layer.grads.items()}

    def zero_grads(self):
        for layer in self._layer_map().values():
            layer.zero_grads()

    # -- forward / backward -------------------------------------------------

    def _check_patch(self, x: np.ndarray):
        expected = (self.config.in_channels, self.config.bands, self.config.frames)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ShapeError(f"expected patch batch of shape (B, {expected[0]}, "
                             f"{expected[1]}, {expected[2]}), got {x.shape}")

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """Masks for a batch of patches (B, C, F, T) -> (B, C, F, T)."""
        self._check_patch(x)
        x = x.astype(self.dtype, copy=False)
        h = self.input_bn.forward(x, train) if self.input_bn is not None else x

        skips = []
        for conv, act in zip(self.enc_convs, self.enc_acts):
            h = act.forward(conv.forward(h, train), train)
            skips.append(h)

        h = skips[-1]
        split_at = []
        for j, (conv, act) in enumerate(zip(self.dec_convs, self.dec_acts)):
            if j > 0:
                split_at.append(h.shape[1])
                h = np.concatenate([h, skips[NUM_SCALES - 1 - j]], axis=1)
            h = act.forward(conv.forward(h, train), train)

        mask = self.final_act.forward(self.final_conv.forward(h, train), train)
        self._split_at = split_at
        return mask

    def backward(self, dmask: np.ndarray) -> np.ndarray:
        """Backpropagate through the recorded forward pass; returns d(input)."""
        g = self.final_conv.backward(self.final_act.backward(dmask))

        skip_grads = {}
        for j in range(NUM_SCALES - 1, -1, -1):
            g = self.dec_convs[j].backward(self.dec_acts[j].backward(g))
            if j > 0:
                split = self._split_at[j - 1]
                skip_grads[NUM_SCALES - 1 - j] = g[:, split:]
                g = g[:, :split]

        for i in range(NUM_SCALES - 1, -1, -1):
            if i in skip_grads:
                g = g + skip_grads[i]
            g = self.enc_convs[i].backward(self.enc_acts[i].backward(g))

        if self.input_bn is not None:
            g = self.input_bn.backward(g)
        return g

    # -- persistence ---------------------------------------------------------

    def state_tensors(self) -> Dict[str, np.ndarray]:
        tensors = dict(self.named_params())
        if self.input_bn is not None:
            tensors["input_bn.running_mean"] = self.input_bn.running_mean
            tensors["input_bn.running_var"] = self.input_bn.running_var
        return tensors

    def save(self, path):
        meta = {"kind": "stem-model", "stem": self.stem, "config": self.config.to_dict()}
        save_tensors(path, self.state_tensors(), meta)

    @classmethod
    def load(cls, path) -> "StemModel":
        tensors, meta = load_tensors(path)
        if meta.get("kind") != "stem-model":
            raise ConfigError(f"{path}: not a stem-model checkpoint")
        config = UNetConfig.from_dict(meta["config"])
        sample = tensors[next(iter(tensors))]
        model = cls(meta["stem"], config, dtype=sample.dtype)
        for name, layer in model._layer_map().items():
            for pn in layer.params:
                layer.params[pn][...] = tensors[f"{name}.{pn}"]
        if model.input_bn is not None:
            model.input_bn.running_mean[...] = tensors["input_bn.running_mean"]
            model.input_bn.running_var[...] = tensors["input_bn.running_var"]
        return model


def infer_mask(model: StemModel, patch: np.ndarray) -> np.ndarray:
    """Soft mask for one patch (C, F, T); entries lie in (0, 1)."""
    if patch.ndim != 3:
        raise ShapeError(f"expected a single patch (C, F, T), got shape {patch.shape}")
    return model.forward(patch[None], train=False)[0]
