"""Time-domain audio container and deterministic WAV file I/O.

All pipeline audio is 44.1 kHz and either mono or stereo. Samples are kept
as float64 in memory; values may exceed +/-1 mid-pipeline and are only
quantized when a 16-bit PCM file is written.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigError, EmptyInputError, FileFormatError

PIPELINE_RATE = 44100

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003


@dataclass
class AudioClip:
    """A (channels x length) block of samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int = PIPELINE_RATE

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise ConfigError(f"samples must be 2-D (channels x length), got ndim={self.samples.ndim}")
        if self.num_channels not in (1, 2):
            raise ConfigError(f"channel count must be 1 or 2, got {self.num_channels}")

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def copy(self) -> "AudioClip":
        return AudioClip(self.samples.copy(), self.sample_rate)

    @classmethod
    def silence(cls, num_samples: int, num_channels: int = 2, sample_rate: int = PIPELINE_RATE):
        return cls(np.zeros((num_channels, num_samples)), sample_rate)


def require_same_layout(a: AudioClip, b: AudioClip):
    if a.num_channels != b.num_channels or a.num_samples != b.num_samples:
        raise AlignmentError(
            f"clips differ in layout: ({a.num_channels}, {a.num_samples}) vs "
            f"({b.num_channels}, {b.num_samples})"
        )


def read_wav(path) -> AudioClip:
    """Read a 16-bit PCM or 32-bit float WAV file at 44.1 kHz."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FileFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise FileFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None or payload is None:
        raise FileFormatError(f"{path}: missing fmt or data chunk")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if rate != PIPELINE_RATE:
        raise FileFormatError(
            f"{path}: sample rate {rate} Hz not supported; expected {PIPELINE_RATE} Hz (no resampling)"
        )
    if channels not in (1, 2):
        raise FileFormatError(f"{path}: {channels} channels not supported")

    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        flat = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise FileFormatError(
            f"{path}: unsupported encoding (format={audio_format}, bits={bits}); "
            "expected 16-bit PCM or 32-bit float"
        )
    samples = flat.reshape(-1, channels).T
    return AudioClip(samples, rate)


def write_wav(path, clip: AudioClip, encoding: str = "pcm16"):
    """Write a WAV file. encoding is 'pcm16' (clamped/quantized) or 'float32'."""
    if clip.num_samples == 0:
        raise EmptyInputError("refusing to write a zero-length WAV file")
    interleaved = clip.samples.T  # (length, channels)
    if encoding == "pcm16":
        clamped = np.clip(interleaved, -1.0, 32767.0 / 32768.0)
        payload = (np.round(clamped * 32768.0).astype("<i2")).tobytes()
        audio_format, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = interleaved.astype("<f4").tobytes()
        audio_format, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ConfigError(f"unknown WAV encoding {encoding!r}")

    channels = clip.num_channels
    block_align = channels * bits // 8
    byte_rate = clip.sample_rate * block_align
    fmt_chunk = struct.pack(
        "<HHIIHH", audio_format, channels, clip.sample_rate, byte_rate, block_align, bits
    )
    riff_size = 4 + (8 + len(fmt_chunk)) + (8 + len(payload))
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", riff_size) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk)
        fh.write(b"data" + struct.pack("<I", len(payload)) + payload)
        if len(payload) & 1:
            fh.write(b"\x00")
