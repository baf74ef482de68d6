"""Stochastic stem-level augmentations and their composed pipeline.

Six operations: kit swap, doubling, pitch shift, saturation, channel swap,
remix, applied in that order. Kit swap and remix are drawn once per mixture;
the other four are independent Bernoulli trials per stem. A master switch
disables everything at once with its own probability. The returned mixture
is always recomputed as the exact sum of the returned stems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .audio import AudioClip, require_same_layout
from .errors import AlignmentError, ConfigError
from .stft import Spectrogram, StftConfig, istft, stft

STEM_ORDER = ("KD", "SD", "TT", "HH", "CY")


@dataclass(frozen=True)
class AugmentConfig:
    p_kit_swap: float = 0.5
    p_channel_swap: float = 0.5
    p_doubling: float = 0.3
    p_pitch_shift: float = 0.3
    p_saturate: float = 0.3
    p_remix: float = 0.3
    p_disable_all: float = 0.5
    beta_range: Tuple[float, float] = (1.0, 5.0)
    gamma_range: Tuple[float, float] = (0.1, 1.0)
    semitone_range: Tuple[int, int] = (-3, 3)
    seed: int = 0

    def __post_init__(self):
        for name in ("p_kit_swap", "p_channel_swap", "p_doubling", "p_pitch_shift",
                     "p_saturate", "p_remix", "p_disable_all"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.beta_range[0] > self.beta_range[1] or self.gamma_range[0] > self.gamma_range[1]:
            raise ConfigError("beta/gamma ranges must be ordered (low, high)")
        if self.semitone_range[0] > self.semitone_range[1]:
            raise ConfigError("semitone range must be ordered (low, high)")

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(p_kit_swap=0, p_channel_swap=0, p_doubling=0, p_pitch_shift=0,
                   p_saturate=0, p_remix=0, p_disable_all=0)


def make_rng(seed, stream: Tuple = ()) -> np.random.Generator:
    """Deterministic generator; parallel pipelines get disjoint stream ids."""
    return np.random.default_rng((seed,) + tuple(stream))


# -- individual augmentations ------------------------------------------------


def kit_swap(available_kits: Sequence[str], rng: np.random.Generator) -> Dict[str, str]:
    """Independently draw a kit for each of the five stems."""
    kits = list(available_kits)
    if len(kits) < 2:
        warnings.warn("kit swap requested with fewer than 2 kits; identity assignment")
        return {stem: kits[0] for stem in STEM_ORDER}
    return {stem: kits[int(rng.integers(len(kits)))] for stem in STEM_ORDER}


def doubling(primary: AudioClip, layer: AudioClip) -> AudioClip:
    """Average the same pattern rendered on two kits."""
    require_same_layout(primary, layer)
    return AudioClip((primary.samples + layer.samples) / 2.0, primary.sample_rate)


_PV_CONFIG = StftConfig(window_length=2048, hop=512)


def pitch_shift(clip: AudioClip, semitones: int,
                semitone_range: Tuple[int, int] = (-3, 3)) -> AudioClip:
    """Duration-preserving pitch shift: phase-vocoder stretch then resample."""
    if not (semitone_range[0] <= semitones <= semitone_range[1]):
        raise ConfigError(f"semitone shift {semitones} outside range {semitone_range}")
    if semitones == 0:
        return clip.copy()

    factor = 2.0 ** (semitones / 12.0)
    stretched = _time_stretch(clip, factor)
    # resample by the same factor: duration returns to the original, pitch scales
    n = clip.num_samples
    positions = np.arange(n) * (stretched.num_samples - 1) / max(n - 1, 1)
    positions = np.clip(positions, 0, stretched.num_samples - 1)
    base = np.arange(stretched.num_samples)
    out = np.stack([np.interp(positions, base, ch) for ch in stretched.samples])
    return AudioClip(out, clip.sample_rate)


def _time_stretch(clip: AudioClip, factor: float) -> AudioClip:
    """Classic phase vocoder: magnitudes interpolated, phases accumulated."""
    spec = stft(clip, _PV_CONFIG)
    bins = spec.bins  # (channels, num_bins, frames)
    n_in = spec.num_frames
    n_out = max(int(round(n_in * factor)), 2)
    hop = _PV_CONFIG.hop
    omega = 2.0 * np.pi * hop * np.arange(spec.num_bins) / _PV_CONFIG.window_length

    mag = np.abs(bins)
    phase = np.angle(bins)
    out = np.empty((bins.shape[0], spec.num_bins, n_out), dtype=complex)
    acc = phase[:, :, 0].copy()
    for m in range(n_out):
        q = m * (n_in - 1) / max(n_out - 1, 1)
        i = min(int(q), n_in - 2)
        frac = q - i
        frame_mag = (1.0 - frac) * mag[:, :, i] + frac * mag[:, :, i + 1]
        out[:, :, m] = frame_mag * np.exp(1j * acc)
        delta = phase[:, :, i + 1] - phase[:, :, i] - omega
        delta -= 2.0 * np.pi * np.round(delta / (2.0 * np.pi))
        acc = acc + omega + delta
    num_samples = int(round(clip.num_samples * factor))
    return istft(Spectrogram(out, _PV_CONFIG, num_samples))


def saturate(clip: AudioClip, beta: float, beta_range: Tuple[float, float] = (1.0, 5.0)
             ) -> AudioClip:
    if not (beta_range[0] <= beta <= beta_range[1]):
        raise ConfigError(f"saturation beta {beta} outside range {beta_range}")
    return AudioClip(np.tanh(beta * clip.samples), clip.sample_rate)


def channel_swap(clip: AudioClip) -> AudioClip:
    if clip.num_channels != 2:
        raise AlignmentError("channel swap requires a stereo clip")
    return AudioClip(clip.samples[::-1].copy(), clip.sample_rate)


def remix(stems: Dict[str, AudioClip], gammas: Dict[str, float],
          gamma_range: Tuple[float, float] = (0.1, 1.0)) -> Dict[str, AudioClip]:
    out = {}
    for stem, clip in stems.items():
        g = gammas[stem]
        if not (gamma_range[0] <= g <= gamma_range[1]):
            raise ConfigError(f"remix gain {g} for {stem} outside range {gamma_range}")
        out[stem] = AudioClip(g * clip.samples, clip.sample_rate)
    return out


# -- composed pipeline -------------------------------------------------------


def sum_stems(stems: Dict[str, AudioClip]) -> AudioClip:
    total = None
    for stem in STEM_ORDER:
        total = stems[stem].samples if total is None else total + stems[stem].samples
    return AudioClip(total.copy() if len(stems) == 1 else total)


def augment_pipeline(bank: Dict[str, Dict[str, AudioClip]], base_kit: str,
                     cfg: AugmentConfig, rng: np.random.Generator
                     ) -> Tuple[AudioClip, Dict[str, AudioClip]]:
    """Apply the six augmentations to one pattern.

    `bank` maps kit id -> {stem id -> clip} for the same pattern; all clips
    must share one length. Draw order is fixed: master disable, kit-swap flag
    and assignments, then per stem (doubling flag/kit, pitch flag/amount,
    saturation flag/beta, channel-swap flag), then remix flag and gains.
    """
    kits = sorted(bank)
    if base_kit not in bank:
        raise ConfigError(f"base kit {base_kit!r} not present in the bank")

    if rng.random() < cfg.p_disable_all:
        stems = {s: bank[base_kit][s].copy() for s in STEM_ORDER}
        return sum_stems(stems), stems

    if rng.random() < cfg.p_kit_swap:
        assignment = kit_swap(kits, rng)
    else:
        assignment = {stem: base_kit for stem in STEM_ORDER}

    stems: Dict[str, AudioClip] = {}
    for stem in STEM_ORDER:
        kit = assignment[stem]
        x = bank[kit][stem]

        if rng.random() < cfg.p_doubling and len(kits) >= 2:
            others = [k for k in kits if k != kit]
            layer_kit = others[int(rng.integers(len(others)))]
            x = doubling(x, bank[layer_kit][stem])

        if rng.random() < cfg.p_pitch_shift:
            lo, hi = cfg.semitone_range
            shift = int(rng.integers(lo, hi + 1))
            x = pitch_shift(x, shift, cfg.semitone_range)

        if rng.random() < cfg.p_saturate:
            beta = float(rng.uniform(*cfg.beta_range))
            x = saturate(x, beta, cfg.beta_range)

        if rng.random() < cfg.p_channel_swap:
            x = channel_swap(x)

        stems[stem] = x if x is not bank[kit][stem] else x.copy()

    if rng.random() < cfg.p_remix:
        gammas = {stem: float(rng.uniform(*cfg.gamma_range)) for stem in STEM_ORDER}
        stems = remix(stems, gammas, cfg.gamma_range)

    return sum_stems(stems), stems
