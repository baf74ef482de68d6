"""End-to-end masked separation: five U-Nets sharing one STFT front end."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .audio import PIPELINE_RATE, AudioClip
from .errors import ConfigError, FileFormatError
from .stft import Spectrogram, StftConfig, crop_and_chunk, istft, split_mag_phase, stft, unchunk_and_pad
from .unet import STEMS, StemModel, UNetConfig
from .wiener import WienerConfig, wiener_combine

MANIFEST_VERSION = 1

# maps stem ids to the output-file naming convention
STEM_FILE_NAMES = {"KD": "kick", "SD": "snare", "TT": "toms", "HH": "hihat", "CY": "cymbals"}


@dataclass
class SeparatorBundle:
    models: Dict[str, StemModel]
    stft_config: StftConfig = StftConfig()
    wiener: WienerConfig = WienerConfig()

    def __post_init__(self):
        if set(self.models) != set(STEMS):
            raise ConfigError(f"bundle needs models for all of {STEMS}, got {sorted(self.models)}")
        shapes = {(m.config.bands, m.config.frames) for m in self.models.values()}
        if len(shapes) != 1:
            raise ConfigError(f"all stem models must share (bands, frames); got {sorted(shapes)}")
        bands = next(iter(shapes))[0]
        if bands > self.stft_config.num_bins:
            raise ConfigError(
                f"model bands {bands} exceed STFT bins {self.stft_config.num_bins}")

    @property
    def bands(self) -> int:
        return next(iter(self.models.values())).config.bands

    @property
    def frames(self) -> int:
        return next(iter(self.models.values())).config.frames


def new_bundle(config: UNetConfig, stft_config: StftConfig = StftConfig(),
               wiener: WienerConfig = WienerConfig(), seed: int = 0,
               dtype=np.float32) -> SeparatorBundle:
    models = {stem: StemModel(stem, config, seed=seed + i, dtype=dtype)
              for i, stem in enumerate(STEMS)}
    return SeparatorBundle(models, stft_config, wiener)


MaskFn = Callable[[str, np.ndarray], np.ndarray]


def separate(bundle: SeparatorBundle, mixture: AudioClip,
             mask_fn: Optional[MaskFn] = None) -> Dict[str, AudioClip]:
    """Estimate the five stems of a stereo 44.1 kHz mixture.

    `mask_fn(stem, patch_batch) -> mask_batch` overrides the networks; used
    by tests to force known masks through the reconstruction path.
    """
    if mixture.sample_rate != PIPELINE_RATE:
        raise ConfigError(f"expected {PIPELINE_RATE} Hz audio, got {mixture.sample_rate} Hz")
    spec = stft(mixture, bundle.stft_config)
    _, phase = split_mag_phase(spec)
    patches, record = crop_and_chunk(spec, bundle.bands, bundle.frames)
    batch = np.stack(patches)

    estimates = {}
    for stem in STEMS:
        if mask_fn is not None:
            masks = mask_fn(stem, batch)
        else:
            masks = bundle.models[stem].forward(batch, train=False)
        estimates[stem] = np.asarray(masks, dtype=np.float64) * batch

    if bundle.wiener.enabled:
        refined = wiener_combine([estimates[s] for s in STEMS], batch, bundle.wiener)
        estimates = dict(zip(STEMS, refined))

    out = {}
    for stem in STEMS:
        full = unchunk_and_pad(list(estimates[stem]), record)
        stem_spec = Spectrogram(full * np.exp(1j * phase), bundle.stft_config, spec.num_samples)
        out[stem] = istft(stem_spec)
    return out


# -- bundle manifest ---------------------------------------------------------
#
# Plain "key: value" text file next to the five checkpoints. Keys:
#   manifest_version, bands, frames, window_length, hop,
#   wiener_alpha, wiener_epsilon, wiener_enabled,
#   checkpoint_kd / _sd / _tt / _hh / _cy  (paths relative to the manifest)


def save_bundle(bundle: SeparatorBundle, directory) -> str:
    os.makedirs(directory, exist_ok=True)
    lines = [
        f"manifest_version: {MANIFEST_VERSION}",
        f"bands: {bundle.bands}",
        f"frames: {bundle.frames}",
        f"window_length: {bundle.stft_config.window_length}",
        f"hop: {bundle.stft_config.hop}",
        f"wiener_alpha: {bundle.wiener.alpha}",
        f"wiener_epsilon: {bundle.wiener.epsilon}",
        f"wiener_enabled: {str(bundle.wiener.enabled).lower()}",
    ]
    for stem in STEMS:
        fname = f"{stem.lower()}.ckpt"
        bundle.models[stem].save(os.path.join(directory, fname))
        lines.append(f"checkpoint_{stem.lower()}: {fname}")
    manifest_path = os.path.join(directory, "bundle.txt")
    with open(manifest_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return manifest_path


def load_bundle(manifest_path) -> SeparatorBundle:
    directory = os.path.dirname(os.path.abspath(manifest_path))
    entries = {}
    with open(manifest_path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise FileFormatError(f"{manifest_path}:{lineno}: expected 'key: value'")
            key, value = line.split(":", 1)
            entries[key.strip()] = value.strip()

    if int(entries.get("manifest_version", -1)) != MANIFEST_VERSION:
        raise FileFormatError(f"{manifest_path}: unsupported manifest version")
    models = {}
    for stem in STEMS:
        rel = entries[f"checkpoint_{stem.lower()}"]
        models[stem] = StemModel.load(os.path.join(directory, rel))
    stft_config = StftConfig(window_length=int(entries["window_length"]),
                             hop=int(entries["hop"]))
    wiener = WienerConfig(alpha=float(entries["wiener_alpha"]),
                          epsilon=float(entries["wiener_epsilon"]),
                          enabled=entries["wiener_enabled"] == "true")
    return SeparatorBundle(models, stft_config, wiener)
