"""Procedural drum kit sampler.

Stand-in for commercial drum libraries: each canonical instrument has a
simple synthesis recipe (decaying oscillators and filtered noise), and each
kit perturbs the recipe parameters with a seeded generator. Rendering is
fully deterministic given (kit, instrument, velocity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import signal as sps

from .audio import PIPELINE_RATE
from .midi import CANONICAL_PITCHES

TAIL_FLOOR = 1e-4  # one-shots are truncated at -80 dB of their peak

# per-instrument base recipe parameters
_RECIPES = {
    36: dict(kind="kick", f_start=60.0, f_end=45.0, sweep=0.08, decay=0.18, length=0.7),
    38: dict(kind="snare", tone=190.0, tone_decay=0.08, noise_lo=150.0, noise_hi=7000.0,
             noise_decay=0.12, length=0.5),
    50: dict(kind="tom", tone=220.0, decay=0.25, length=1.0),
    47: dict(kind="tom", tone=165.0, decay=0.30, length=1.2),
    43: dict(kind="tom", tone=110.0, decay=0.35, length=1.4),
    # hats sit bright (7-10.5 kHz shimmer), cymbals carry their body lower
    # (2.5-6 kHz): distinct registers, as with real instruments
    42: dict(kind="hat", lo=7000.0, hi=10500.0, decay=0.035, length=0.15),
    46: dict(kind="hat", lo=7000.0, hi=10500.0, decay=0.25, length=0.9),
    49: dict(kind="cymbal", lo=2500.0, hi=6000.0, decay=0.9, length=2.4),
    51: dict(kind="cymbal", lo=3000.0, hi=5500.0, decay=0.6, length=1.8),
}


@dataclass
class DrumKitSampler:
    kit_id: str
    seed: int = 0
    velocity_exponent: float = 1.6
    sample_rate: int = PIPELINE_RATE
    params: Dict[int, dict] = field(default_factory=dict)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        for pitch in CANONICAL_PITCHES:
            base = dict(_RECIPES[pitch])
            # timbral spread between kits: perturb frequencies and decays
            freq_mult = rng.uniform(0.88, 1.12)
            decay_mult = rng.uniform(0.8, 1.25)
            for key in ("f_start", "f_end", "tone", "cutoff", "lo", "hi"):
                if key in base:
                    base[key] *= freq_mult
            for key in ("decay", "tone_decay", "noise_decay"):
                if key in base:
                    base[key] *= decay_mult
            # static stereo placement per kit and instrument (+/- 1 dB)
            pan = rng.uniform(-1.0, 1.0)
            base["gain_l"] = 10.0 ** (+0.05 * pan)
            base["gain_r"] = 10.0 ** (-0.05 * pan)
            base["noise_seed"] = int(rng.integers(0, 2 ** 31))
            self.params[pitch] = base

    # -- synthesis ----------------------------------------------------------

    def one_shot(self, pitch: int, velocity: int) -> np.ndarray:
        """Stereo one-shot (2, n); deterministic for fixed (kit, pitch, velocity)."""
        p = self.params[pitch]
        sr = self.sample_rate
        n = int(round(p["length"] * sr))
        t = np.arange(n) / sr
        rng = np.random.default_rng((self.seed, pitch, velocity))
        amp = (velocity / 127.0) ** self.velocity_exponent

        kind = p["kind"]
        if kind == "kick":
            freq = p["f_end"] + (p["f_start"] - p["f_end"]) * np.exp(-t / p["sweep"])
            phase = 2.0 * np.pi * np.cumsum(freq) / sr
            mono = np.sin(phase) * np.exp(-t / p["decay"])
            left = right = mono
        elif kind == "snare":
            tone = np.sin(2.0 * np.pi * p["tone"] * t) * np.exp(-t / p["tone_decay"])
            sos = sps.butter(2, [p["noise_lo"], p["noise_hi"]], btype="bandpass",
                             fs=sr, output="sos")
            env = np.exp(-t / p["noise_decay"])
            left = 0.5 * tone + 0.7 * sps.sosfilt(sos, rng.standard_normal(n) * 0.5) * env
            right = 0.5 * tone + 0.7 * sps.sosfilt(sos, rng.standard_normal(n) * 0.5) * env
        elif kind == "tom":
            freq = p["tone"] * (1.0 + 0.06 * np.exp(-t / 0.05))
            phase = 2.0 * np.pi * np.cumsum(freq) / sr
            mono = np.sin(phase) * np.exp(-t / p["decay"])
            left = right = mono
        elif kind == "hat":
            hi = min(p["hi"], 0.45 * sr)
            sos = sps.butter(2, [p["lo"], hi], btype="bandpass", fs=sr, output="sos")
            env = np.exp(-t / p["decay"])
            left = sps.sosfilt(sos, rng.standard_normal(n) * 0.4) * env
            right = sps.sosfilt(sos, rng.standard_normal(n) * 0.4) * env
        elif kind == "cymbal":
            hi = min(p["hi"], 0.45 * sr)
            sos = sps.butter(2, [p["lo"], hi], btype="bandpass", fs=sr, output="sos")
            env = np.exp(-t / p["decay"])
            left = sps.sosfilt(sos, rng.standard_normal(n) * 0.4) * env
            right = sps.sosfilt(sos, rng.standard_normal(n) * 0.4) * env
        else:  # pragma: no cover
            raise ValueError(f"unknown recipe kind {kind!r}")

        out = np.stack([left * p["gain_l"], right * p["gain_r"]]) * amp
        return _truncate_tail(_attack_ramp(out, sr))

    def max_tail_samples(self) -> int:
        return int(round(max(p["length"] for p in self.params.values()) * self.sample_rate))


ATTACK_SECONDS = 0.002


def _attack_ramp(samples: np.ndarray, sr: int) -> np.ndarray:
    """Raised-cosine fade-in. An abrupt envelope start splashes energy across
    the whole band for one analysis frame, which makes every instrument's
    onset look alike; a ~2 ms ramp keeps hits percussive but band-limited."""
    n = min(int(round(ATTACK_SECONDS * sr)), samples.shape[1])
    if n > 1:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
        samples[:, :n] *= ramp
    return samples


def _truncate_tail(samples: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(samples))
    if peak == 0.0:
        return samples
    above = np.flatnonzero(np.max(np.abs(samples), axis=0) >= peak * TAIL_FLOOR)
    return samples[:, :above[-1] + 1]


def default_kits(num_kits: int = 10, base_seed: int = 1000) -> Dict[str, DrumKitSampler]:
    """Ten seeded parameter perturbations of the base recipes."""
    return {f"kit{i:02d}": DrumKitSampler(f"kit{i:02d}", seed=base_seed + i)
            for i in range(num_kits)}
