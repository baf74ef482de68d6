"""NMFD and SAB-NMF baseline separators with template dictionaries.

NMFD fits the convolutive model V ~ sum_t W(t) . shift_t(H) with
KL-divergence multiplicative updates. SAB-NMF is a frame-wise NMF whose
bases blend from fixed templates toward freely adapted ones over the
iterations. Both preserve nonnegativity and yield a non-increasing
divergence trace; components are grouped per stem and refined with
alpha-Wiener filtering against the mixture magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .audio import AudioClip, PIPELINE_RATE
from .dataset import STEM_GROUPS
from .errors import ConfigError, DegenerateInputError
from .midi import CANONICAL_NAMES
from .nn import load_tensors, save_tensors
from .stft import Spectrogram, StftConfig, istft, stft
from .unet import STEMS
from .wiener import WienerConfig, wiener_combine

RATIO_FLOOR = 1e-12  # guards 0/0 inside the multiplicative update ratios

_PITCH_TO_STEM = {pitch: stem for stem, members in STEM_GROUPS.items() for pitch in members}


@dataclass(frozen=True)
class NmfdConfig:
    iterations: int = 200
    template_length: int = 10  # frames per NMFD template (~232 ms at the default hop)
    bases_mode: str = "fixed"  # fixed | adaptive | semi-adaptive
    lambda_exponent: float = 2.0  # semi-adaptive schedule lam(k) = (k/K)^exp
    epsilon: float = RATIO_FLOOR
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.template_length < 1:
            raise ConfigError("template_length must be >= 1")
        if self.bases_mode not in ("fixed", "adaptive", "semi-adaptive"):
            raise ConfigError(f"unknown bases mode {self.bases_mode!r}")


@dataclass
class Template:
    stem: str
    pitch: int
    velocity: int
    patch: np.ndarray  # (num_bins, L), unit max
    column: np.ndarray  # (num_bins,), unit max


@dataclass
class TemplateDictionary:
    templates: List[Template]
    num_bins: int
    template_length: int

    def __post_init__(self):
        stems_present = {t.stem for t in self.templates}
        missing = set(STEMS) - stems_present
        if missing:
            raise ConfigError(f"template dictionary lacks stems: {sorted(missing)}")

    @property
    def num_components(self) -> int:
        return len(self.templates)

    def labels(self) -> List[str]:
        return [t.stem for t in self.templates]

    def nmfd_tensor(self) -> np.ndarray:
        """(L, num_bins, R) stack of template patches."""
        w = np.stack([t.patch for t in self.templates], axis=-1)  # (bins, L, R)
        return np.ascontiguousarray(np.transpose(w, (1, 0, 2)))

    def column_matrix(self) -> np.ndarray:
        """(num_bins, R) matrix of per-template spectral columns."""
        return np.stack([t.column for t in self.templates], axis=1)

    def save(self, path):
        tensors = {}
        meta_entries = []
        for i, t in enumerate(self.templates):
            tensors[f"patch.{i}"] = t.patch
            tensors[f"column.{i}"] = t.column
            meta_entries.append({"stem": t.stem, "pitch": t.pitch, "velocity": t.velocity})
        meta = {"kind": "template-dictionary", "num_bins": self.num_bins,
                "template_length": self.template_length, "templates": meta_entries}
        save_tensors(path, tensors, meta)

    @classmethod
    def load(cls, path) -> "TemplateDictionary":
        tensors, meta = load_tensors(path)
        if meta.get("kind") != "template-dictionary":
            raise ConfigError(f"{path}: not a template dictionary")
        templates = [
            Template(e["stem"], int(e["pitch"]), int(e["velocity"]),
                     tensors[f"patch.{i}"], tensors[f"column.{i}"])
            for i, e in enumerate(meta["templates"])
        ]
        return cls(templates, int(meta["num_bins"]), int(meta["template_length"]))


def build_templates(hits: Dict[int, Sequence[Tuple[int, AudioClip]]],
                    stft_cfg: StftConfig, cfg: NmfdConfig) -> TemplateDictionary:
    """Learn templates from isolated hits, one per (instrument, velocity).

    NMFD templates are onset-aligned magnitude patches of L frames; SAB
    columns are the time-averaged magnitude spectra. Both unit-max normalized.
    """
    templates = []
    for pitch, entries in sorted(hits.items()):
        stem = _PITCH_TO_STEM.get(pitch)
        if stem is None:
            raise ConfigError(f"pitch {pitch} does not belong to any stem group")
        for velocity, clip in entries:
            if clip.num_samples == 0:
                raise DegenerateInputError(f"empty hit for pitch {pitch}")
            mag = np.abs(stft(clip, stft_cfg).bins).mean(axis=0)  # (bins, frames)
            frame_energy = mag.sum(axis=0)
            peak = frame_energy.max()
            if peak <= 0.0:
                raise DegenerateInputError(
                    f"silent hit for pitch {pitch} velocity {velocity}")
            onset = int(np.argmax(frame_energy >= 0.1 * peak))
            patch = mag[:, onset:onset + cfg.template_length]
            if patch.shape[1] < cfg.template_length:
                patch = np.pad(patch, ((0, 0), (0, cfg.template_length - patch.shape[1])))
            patch = patch / patch.max()
            column = mag.mean(axis=1)
            column = column / column.max()
            templates.append(Template(stem, pitch, velocity, patch, column))
    return TemplateDictionary(templates, stft_cfg.num_bins, cfg.template_length)


@dataclass
class FactorizationResult:
    bases: np.ndarray  # NMFD: (L, F, R); SAB-NMF: (F, R) final blended bases
    activations: np.ndarray  # (R, N)
    component_magnitudes: List[np.ndarray]  # per component, (F, N)
    divergence: List[float]
    labels: List[str]


def _kl_divergence(v: np.ndarray, lam: np.ndarray) -> float:
    lam = np.maximum(lam, RATIO_FLOOR)
    mask = v > 0
    terms = np.where(mask, v * np.log(np.maximum(v, RATIO_FLOOR) / lam) - v, 0.0)
    return float(terms.sum() + lam.sum())


def _shift_right(h: np.ndarray, t: int) -> np.ndarray:
    if t == 0:
        return h
    out = np.zeros_like(h)
    out[:, t:] = h[:, :-t]
    return out


def _shift_left(m: np.ndarray, t: int) -> np.ndarray:
    if t == 0:
        return m
    out = np.zeros_like(m)
    out[:, :-t] = m[:, t:]
    return out


def _nmfd_model(w: np.ndarray, h: np.ndarray) -> np.ndarray:
    lam = np.zeros((w.shape[1], h.shape[1]))
    for t in range(w.shape[0]):
        lam += w[t] @ _shift_right(h, t)
    return lam


def nmfd_decompose(v: np.ndarray, dictionary: TemplateDictionary, cfg: NmfdConfig,
                   w_init: Optional[np.ndarray] = None,
                   h_init: Optional[np.ndarray] = None) -> FactorizationResult:
    """Convolutive KL-NMF with multiplicative updates for K iterations."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise DegenerateInputError("V must be nonnegative")
    if not np.any(v > 0):
        raise DegenerateInputError("V is identically zero")

    w0 = dictionary.nmfd_tensor() if w_init is None else np.array(w_init, dtype=np.float64)
    length, bins, r = w0.shape
    if bins != v.shape[0]:
        raise ConfigError(f"dictionary has {bins} bins but V has {v.shape[0]}")
    n = v.shape[1]
    rng = np.random.default_rng(cfg.seed)
    h = rng.uniform(RATIO_FLOOR, 1.0, size=(r, n)) if h_init is None \
        else np.array(h_init, dtype=np.float64)

    w = w0.copy()
    wa = w0 * (1.0 + 0.01 * rng.standard_normal(w0.shape)) if cfg.bases_mode == "semi-adaptive" else None
    if wa is not None:
        np.maximum(wa, RATIO_FLOOR, out=wa)

    ones = np.ones_like(v)
    trace = []
    for k in range(1, cfg.iterations + 1):
        if cfg.bases_mode == "semi-adaptive":
            lam_mix = (k / cfg.iterations) ** cfg.lambda_exponent
            w = (1.0 - lam_mix) * w0 + lam_mix * wa

        # H update (model is linear in H, so this is a monotone MM step)
        lam = np.maximum(_nmfd_model(w, h), RATIO_FLOOR)
        ratio = v / lam
        num = np.zeros_like(h)
        den = np.zeros_like(h)
        for t in range(length):
            num += w[t].T @ _shift_left(ratio, t)
            den += w[t].T @ _shift_left(ones, t)
        h *= num / np.maximum(den, RATIO_FLOOR)

        # W update (all t slices at once; the model is linear in W as well)
        if cfg.bases_mode != "fixed":
            lam = np.maximum(_nmfd_model(w, h), RATIO_FLOOR)
            ratio = v / lam
            target = wa if cfg.bases_mode == "semi-adaptive" else w
            for t in range(length):
                ht = _shift_right(h, t)
                num_t = ratio @ ht.T
                den_t = np.maximum(ones @ ht.T, RATIO_FLOOR)
                target[t] *= num_t / den_t
            if cfg.bases_mode == "semi-adaptive":
                w = (1.0 - lam_mix) * w0 + lam_mix * wa

        trace.append(_kl_divergence(v, _nmfd_model(w, h)))

    components = [
        sum(np.outer(w[t][:, j], _shift_right(h[j:j + 1, :], t)[0]) for t in range(length))
        for j in range(r)
    ]
    return FactorizationResult(w, h, components, trace, dictionary.labels())


def sabnmf_decompose(v: np.ndarray, dictionary: TemplateDictionary, cfg: NmfdConfig
                     ) -> FactorizationResult:
    """Frame-wise NMF with semi-adaptive bases blending W0 -> Wa over iterations."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise DegenerateInputError("V must be nonnegative")
    if not np.any(v > 0):
        raise DegenerateInputError("V is identically zero")

    w0 = dictionary.column_matrix()
    bins, r = w0.shape
    if bins != v.shape[0]:
        raise ConfigError(f"dictionary has {bins} bins but V has {v.shape[0]}")
    n = v.shape[1]
    rng = np.random.default_rng(cfg.seed)
    h = rng.uniform(RATIO_FLOOR, 1.0, size=(r, n))
    wa = np.maximum(w0 * (1.0 + 0.01 * rng.standard_normal(w0.shape)), RATIO_FLOOR)

    adaptive = cfg.bases_mode != "fixed"
    ones = np.ones_like(v)
    trace = []
    for k in range(1, cfg.iterations + 1):
        lam_mix = (k / cfg.iterations) ** cfg.lambda_exponent \
            if cfg.bases_mode == "semi-adaptive" else (1.0 if cfg.bases_mode == "adaptive" else 0.0)
        w = (1.0 - lam_mix) * w0 + lam_mix * wa

        lam = np.maximum(w @ h, RATIO_FLOOR)
        h *= (w.T @ (v / lam)) / np.maximum(w.T @ ones, RATIO_FLOOR)

        if adaptive and lam_mix > 0.0:
            lam = np.maximum(w @ h, RATIO_FLOOR)
            wa *= ((v / lam) @ h.T) / np.maximum(ones @ h.T, RATIO_FLOOR)
            w = (1.0 - lam_mix) * w0 + lam_mix * wa

        trace.append(_kl_divergence(v, w @ h))

    components = [np.outer(w[:, j], h[j]) for j in range(r)]
    return FactorizationResult(w, h, components, trace, dictionary.labels())


def components_to_stems(result: FactorizationResult, mixture_magnitude: np.ndarray,
                        wiener_cfg: WienerConfig = WienerConfig()) -> Dict[str, np.ndarray]:
    """Group component reconstructions per stem and alpha-Wiener refine them."""
    if len(result.labels) != len(result.component_magnitudes):
        raise ConfigError("every component needs a stem label")
    per_stem = {stem: np.zeros_like(mixture_magnitude) for stem in STEMS}
    for label, comp in zip(result.labels, result.component_magnitudes):
        if label not in per_stem:
            raise ConfigError(f"component labeled with unknown stem {label!r}")
        per_stem[label] += comp
    refined = wiener_combine([per_stem[s] for s in STEMS], mixture_magnitude, wiener_cfg)
    return dict(zip(STEMS, refined))


def baseline_separate(mixture: AudioClip, dictionary: TemplateDictionary, method: str,
                      cfg: NmfdConfig, stft_cfg: StftConfig = StftConfig(),
                      wiener_cfg: WienerConfig = WienerConfig()) -> Dict[str, AudioClip]:
    """Separate a stereo mixture, processing the two channels independently."""
    if method not in ("nmfd", "sab-nmf"):
        raise ConfigError(f"unknown baseline method {method!r}")
    if mixture.sample_rate != PIPELINE_RATE:
        raise ConfigError(f"expected {PIPELINE_RATE} Hz audio, got {mixture.sample_rate}")

    spec = stft(mixture, stft_cfg)
    phase = np.angle(spec.bins)
    stem_mags = {stem: np.zeros_like(phase, dtype=np.float64) for stem in STEMS}
    for ch in range(spec.num_channels):
        v = np.abs(spec.bins[ch])
        if method == "nmfd":
            result = nmfd_decompose(v, dictionary, cfg)
        else:
            result = sabnmf_decompose(v, dictionary, cfg)
        per_stem = components_to_stems(result, v, wiener_cfg)
        for stem in STEMS:
            stem_mags[stem][ch] = per_stem[stem]

    out = {}
    for stem in STEMS:
        stem_spec = Spectrogram(stem_mags[stem] * np.exp(1j * phase), stft_cfg,
                                spec.num_samples)
        out[stem] = istft(stem_spec)
    return out
