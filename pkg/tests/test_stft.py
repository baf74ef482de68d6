import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import naive_dft, rel_err
from drumsep.audio import AudioClip
from drumsep.errors import ConfigError, EmptyInputError, ShapeError
from drumsep.stft import (
    FramingRecord,
    Spectrogram,
    StftConfig,
    crop_and_chunk,
    istft,
    merge_mag_phase,
    periodic_hann,
    split_mag_phase,
    stft,
    unchunk_and_pad,
)


def test_periodic_hann_against_cosine_definition():
    n = 64
    w = periodic_hann(n)
    expected = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    np.testing.assert_allclose(w, expected, rtol=0, atol=1e-15)
    # periodic (not symmetric): w[0] == 0 and no matching endpoint at n-1
    assert w[0] == 0.0
    assert w[n // 2] == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        StftConfig(window_length=1000, hop=250)  # not a power of two
    with pytest.raises(ConfigError):
        StftConfig(window_length=1024, hop=768)  # hop does not divide window
    with pytest.raises(ConfigError):
        StftConfig(window_length=1024, hop=1024)  # no overlap
    with pytest.raises(ConfigError):
        StftConfig(window_length=1024, hop=0)
    cfg = StftConfig(window_length=1024, hop=256)
    assert cfg.num_bins == 513


def test_frame_count_and_segment_samples_inverse():
    cfg = StftConfig(window_length=1024, hop=256)
    for frames in (2, 3, 128, 512):
        n = cfg.segment_samples(frames)
        assert cfg.num_frames(n) == frames
    # paper-scale relationship: T frames <-> (T-1)*hop samples
    big = StftConfig(window_length=4096, hop=1024)
    assert big.segment_samples(512) == 511 * 1024
    assert big.num_frames(511 * 1024) == 512


def test_stft_matches_naive_dft_on_one_frame():
    """First centered frame of a short signal, checked against the O(n^2) DFT."""
    cfg = StftConfig(window_length=64, hop=16)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(256)
    spec = stft(AudioClip(x[None]), cfg)

    # frame m covers padded[m*hop : m*hop+64]; padding is a half-window reflection
    half = 32
    padded = np.concatenate([x[1:half + 1][::-1], x, x[-half - 1:-1][::-1]])
    win = periodic_hann(64)
    for m in (0, 3, 7):
        frame = padded[m * 16:m * 16 + 64] * win
        ref = naive_dft(frame)[:33]
        assert rel_err(spec.bins[0, :, m], ref) < 1e-12


def test_roundtrip_is_near_exact():
    cfg = StftConfig(window_length=1024, hop=256)
    rng = np.random.default_rng(1)
    for n in (1000, 1024, 4096, 44100):
        x = rng.standard_normal((2, n))
        clip = AudioClip(x)
        back = istft(stft(clip, cfg))
        assert back.num_samples == n
        assert rel_err(back.samples, x) < 1e-12


@settings(max_examples=25, deadline=None)
@given(n=st.integers(min_value=32, max_value=5000), seed=st.integers(0, 2**32 - 1))
def test_roundtrip_property(n, seed):
    cfg = StftConfig(window_length=256, hop=64)
    x = np.random.default_rng(seed).standard_normal((1, n))
    back = istft(stft(AudioClip(x), cfg))
    assert back.samples.shape == x.shape
    assert rel_err(back.samples, x) < 1e-10


def test_empty_clip_rejected():
    with pytest.raises(EmptyInputError):
        stft(AudioClip(np.zeros((1, 0))))


def test_split_merge_mag_phase_roundtrip_and_zero_phase():
    cfg = StftConfig(window_length=256, hop=64)
    x = np.random.default_rng(2).standard_normal((2, 1000))
    spec = stft(AudioClip(x), cfg)
    mag, phase = split_mag_phase(spec)
    assert np.all(mag >= 0)
    merged = merge_mag_phase(mag, phase, cfg, spec.num_samples)
    assert rel_err(merged.bins, spec.bins) < 1e-14
    # exactly-zero bins carry phase 0
    zero_spec = Spectrogram(np.zeros((1, 129, 4), dtype=complex), cfg, 0)
    _, zphase = split_mag_phase(zero_spec)
    assert np.all(zphase == 0.0)


def test_crop_and_chunk_shapes_and_inverse():
    cfg = StftConfig(window_length=256, hop=64)
    x = np.random.default_rng(3).standard_normal((2, 64 * 70))
    spec = stft(AudioClip(x), cfg)  # 71 frames
    patches, record = crop_and_chunk(spec, bands=64, frames_per_patch=32)
    assert len(patches) == 3  # ceil(71/32)
    assert all(p.shape == (2, 64, 32) for p in patches)
    # tail zero-padded
    assert np.all(patches[-1][:, :, 71 - 64:] == 0)

    full = unchunk_and_pad(patches, record)
    assert full.shape == (2, spec.num_bins, spec.num_frames)
    np.testing.assert_array_equal(full[:, :64, :], np.abs(spec.bins[:, :64, :]))
    assert np.all(full[:, 64:, :] == 0)


def test_crop_and_chunk_errors():
    cfg = StftConfig(window_length=256, hop=64)
    spec = stft(AudioClip(np.ones((1, 512))), cfg)
    with pytest.raises(ConfigError):
        crop_and_chunk(spec, bands=500, frames_per_patch=8)
    patches, record = crop_and_chunk(spec, bands=64, frames_per_patch=8)
    with pytest.raises(ShapeError):
        unchunk_and_pad(patches[:-1], record)
    bad = [np.zeros((1, 64, 9))] * record.num_patches
    with pytest.raises(ShapeError):
        unchunk_and_pad(bad, record)
