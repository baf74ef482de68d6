"""STFT analysis/synthesis and the crop/chunk framing feeding the networks.

Analysis is centered: the signal is padded by half a window on both sides
(reflection where possible) so a clip of length L yields 1 + L // hop frames.
Synthesis divides the overlap-added result by the summed squared window,
which gives perfect reconstruction for the periodic Hann window whenever the
hop divides the window length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .audio import AudioClip
from .errors import ConfigError, EmptyInputError, ShapeError

_OLA_EPS = 1e-12


def periodic_hann(length: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


@dataclass(frozen=True)
class StftConfig:
    window_length: int = 4096
    hop: int = 1024
    window_kind: str = "periodic-hann"
    centered: bool = True

    def __post_init__(self):
        if self.window_kind != "periodic-hann":
            raise ConfigError(f"unsupported window kind {self.window_kind!r}")
        if self.window_length < 2 or self.window_length & (self.window_length - 1):
            raise ConfigError(f"window_length must be a power of two, got {self.window_length}")
        if not (0 < self.hop <= self.window_length):
            raise ConfigError(f"hop must be in (0, window_length], got {self.hop}")
        if self.window_length % self.hop or self.window_length // self.hop < 2:
            raise ConfigError(
                f"(window_length={self.window_length}, hop={self.hop}) does not satisfy "
                "constant overlap-add for the periodic Hann window"
            )

    @property
    def num_bins(self) -> int:
        return self.window_length // 2 + 1

    def window(self) -> np.ndarray:
        return periodic_hann(self.window_length)

    def num_frames(self, num_samples: int) -> int:
        return 1 + num_samples // self.hop

    def segment_samples(self, num_frames: int) -> int:
        """Smallest sample count that yields exactly `num_frames` analysis frames."""
        return (num_frames - 1) * self.hop


@dataclass
class Spectrogram:
    bins: np.ndarray  # complex, (channels, num_bins, num_frames)
    config: StftConfig
    num_samples: int  # original clip length, needed to invert exactly

    @property
    def num_channels(self) -> int:
        return self.bins.shape[0]

    @property
    def num_bins(self) -> int:
        return self.bins.shape[1]

    @property
    def num_frames(self) -> int:
        return self.bins.shape[2]


def _pad_for_analysis(samples: np.ndarray, half: int) -> np.ndarray:
    length = samples.shape[1]
    if length > half:
        return np.pad(samples, ((0, 0), (half, half)), mode="reflect")
    # too short to reflect a full half-window; fall back to zeros
    return np.pad(samples, ((0, 0), (half, half)), mode="constant")


def stft(clip: AudioClip, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Complex STFT of every channel; deterministic for fixed input."""
    if clip.num_samples < 1:
        raise EmptyInputError("cannot compute the STFT of an empty clip")
    win = cfg.window()
    w = cfg.window_length
    half = w // 2
    padded = _pad_for_analysis(clip.samples, half) if cfg.centered else clip.samples
    if padded.shape[1] < w:
        padded = np.pad(padded, ((0, 0), (0, w - padded.shape[1])), mode="constant")
    n_frames = 1 + (padded.shape[1] - w) // cfg.hop

    # frame with stride tricks: (channels, n_frames, window)
    stride_c, stride_n = padded.strides
    frames = np.lib.stride_tricks.as_strided(
        padded,
        shape=(padded.shape[0], n_frames, w),
        strides=(stride_c, stride_n * cfg.hop, stride_n),
        writeable=False,
    )
    spec = np.fft.rfft(frames * win, axis=-1)  # (channels, n_frames, bins)
    return Spectrogram(np.transpose(spec, (0, 2, 1)), cfg, clip.num_samples)


def istft(spec: Spectrogram) -> AudioClip:
    """Overlap-add inverse normalized by the summed squared window."""
    if spec.num_frames < 1:
        raise EmptyInputError("cannot invert a zero-frame spectrogram")
    cfg = spec.config
    win = cfg.window()
    w = cfg.window_length
    hop = cfg.hop
    n_frames = spec.num_frames
    total = w + (n_frames - 1) * hop

    frames = np.fft.irfft(np.transpose(spec.bins, (0, 2, 1)), n=w, axis=-1)
    frames *= win

    out = np.zeros((spec.num_channels, total))
    norm = np.zeros(total)
    win_sq = win * win
    for m in range(n_frames):
        out[:, m * hop:m * hop + w] += frames[:, m]
        norm[m * hop:m * hop + w] += win_sq
    out /= np.maximum(norm, _OLA_EPS)

    if cfg.centered:
        half = w // 2
        out = out[:, half:half + spec.num_samples]
    else:
        out = out[:, :spec.num_samples]
    return AudioClip(out)


def split_mag_phase(spec: Spectrogram) -> Tuple[np.ndarray, np.ndarray]:
    """Magnitude and phase; the phase of an exactly-zero bin is 0."""
    magnitude = np.abs(spec.bins)
    phase = np.angle(spec.bins)  # angle(0) == 0, the canonical choice
    return magnitude, phase


def merge_mag_phase(magnitude: np.ndarray, phase: np.ndarray, cfg: StftConfig,
                    num_samples: int) -> Spectrogram:
    return Spectrogram(magnitude * np.exp(1j * phase), cfg, num_samples)


@dataclass(frozen=True)
class FramingRecord:
    """Bookkeeping needed to undo crop_and_chunk."""

    num_channels: int
    num_bins: int
    num_frames: int
    bands: int
    frames_per_patch: int
    num_patches: int
    num_samples: int


def crop_and_chunk(spec: Spectrogram, bands: int, frames_per_patch: int
                   ) -> Tuple[List[np.ndarray], FramingRecord]:
    """Crop the magnitude to the lowest `bands` bins and cut it into patches.

    Returns ceil(num_frames / frames_per_patch) patches of exact shape
    (channels, bands, frames_per_patch); the final patch is zero-padded in time.
    """
    if bands > spec.num_bins:
        raise ConfigError(f"cannot retain {bands} bands from {spec.num_bins} bins")
    if frames_per_patch < 1:
        raise ConfigError("frames_per_patch must be >= 1")
    magnitude = np.abs(spec.bins[:, :bands, :])
    n = spec.num_frames
    num_patches = -(-n // frames_per_patch)
    padded = np.pad(magnitude, ((0, 0), (0, 0), (0, num_patches * frames_per_patch - n)))
    patches = [padded[:, :, i * frames_per_patch:(i + 1) * frames_per_patch].copy()
               for i in range(num_patches)]
    record = FramingRecord(spec.num_channels, spec.num_bins, n, bands,
                           frames_per_patch, num_patches, spec.num_samples)
    return patches, record


def unchunk_and_pad(patches: List[np.ndarray], record: FramingRecord) -> np.ndarray:
    """Concatenate patches, drop the temporal padding, zero-fill bands >= F."""
    if len(patches) != record.num_patches:
        raise ShapeError(f"expected {record.num_patches} patches, got {len(patches)}")
    for p in patches:
        if p.shape != (record.num_channels, record.bands, record.frames_per_patch):
            raise ShapeError(
                f"patch shape {p.shape} inconsistent with framing record "
                f"({record.num_channels}, {record.bands}, {record.frames_per_patch})"
            )
    joined = np.concatenate(patches, axis=2)[:, :, :record.num_frames]
    full = np.zeros((record.num_channels, record.num_bins, record.num_frames))
    full[:, :record.bands, :] = joined
    return full
