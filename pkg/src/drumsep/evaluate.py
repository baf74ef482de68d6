"""Separation quality (nSDR) and runtime (real-time ratio) evaluation.

nSDR compares an estimate against its reference with an epsilon-regularized
energy ratio in dB; a clip scores 0 dB when both signals are silent and also
when the estimate is silent against a silent reference's counterpart. The
real-time ratio divides compute time by audio duration, excluding file I/O.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .audio import AudioClip, require_same_layout
from .errors import ConfigError, EvaluationError
from .unet import STEMS


@dataclass(frozen=True)
class EvalConfig:
    epsilon: float = 1e-7

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")


def nsdr_stem(reference: AudioClip, estimate: AudioClip,
              cfg: EvalConfig = EvalConfig()) -> float:
    """10*log10((sum ref^2 + eps) / (sum (ref-est)^2 + eps)), over all channels."""
    require_same_layout(reference, estimate)
    ref = reference.samples
    err = ref - estimate.samples
    return float(10.0 * np.log10(
        (np.sum(ref * ref) + cfg.epsilon) / (np.sum(err * err) + cfg.epsilon)))


# -- aggregation --------------------------------------------------------------


@dataclass
class EvalRow:
    clip_id: str
    kit_id: str
    stem: str
    nsdr: float
    has_energy: bool  # from the clip annotation; silent stems average separately


@dataclass
class EvalReport:
    rows: List[EvalRow]

    def _select(self, stem: Optional[str] = None, kit: Optional[str] = None,
                energy: Optional[bool] = None) -> List[EvalRow]:
        return [r for r in self.rows
                if (stem is None or r.stem == stem)
                and (kit is None or r.kit_id == kit)
                and (energy is None or r.has_energy == energy)]

    def pooled_mean(self, stem: Optional[str] = None,
                    energy: Optional[bool] = None) -> Optional[float]:
        """Mean over all matching rows, every clip weighted equally."""
        rows = self._select(stem=stem, energy=energy)
        return float(np.mean([r.nsdr for r in rows])) if rows else None

    def kit_mean(self, stem: Optional[str] = None,
                 energy: Optional[bool] = None) -> Optional[float]:
        """Mean of per-kit means, every kit weighted equally."""
        kits = sorted({r.kit_id for r in self._select(stem=stem, energy=energy)})
        per_kit = [np.mean([r.nsdr for r in self._select(stem=stem, kit=k, energy=energy)])
                   for k in kits]
        return float(np.mean(per_kit)) if per_kit else None

    def summary(self) -> dict:
        out: Dict[str, dict] = {}
        for stem in list(STEMS) + ["All"]:
            key = None if stem == "All" else stem
            out[stem] = {
                "pooled": self.pooled_mean(stem=key),
                "kit_mean": self.kit_mean(stem=key),
                "pooled_nonzero": self.pooled_mean(stem=key, energy=True),
                "pooled_zero": self.pooled_mean(stem=key, energy=False),
            }
        return out

    def to_json(self) -> str:
        return json.dumps({
            "rows": [vars(r) for r in self.rows],
            "summary": self.summary(),
        }, indent=2, sort_keys=True)

    def render_text(self) -> str:
        lines = [f"{'stem':<6}{'pooled':>10}{'kit-mean':>10}{'nonzero':>10}{'zero':>10}"]
        for stem, vals in self.summary().items():
            cells = "".join(
                f"{vals[k]:>10.2f}" if vals[k] is not None else f"{'--':>10}"
                for k in ("pooled", "kit_mean", "pooled_nonzero", "pooled_zero"))
            lines.append(f"{stem:<6}{cells}")
        return "\n".join(lines)


def nsdr_aggregate(entries: Sequence[dict], cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Score many clips.

    Each entry: {clip_id, kit_id, references: {stem: AudioClip},
    estimates: {stem: AudioClip}, energy: {stem: bool}}. A missing energy
    annotation is an error: silent and sounding stems must never be pooled
    blindly.
    """
    rows = []
    for entry in entries:
        energy = entry.get("energy")
        if energy is None:
            raise EvaluationError(
                f"clip {entry.get('clip_id')!r} lacks per-stem energy annotations")
        for stem in STEMS:
            if stem not in entry["references"] or stem not in entry["estimates"]:
                raise EvaluationError(
                    f"clip {entry.get('clip_id')!r} lacks stem {stem} "
                    "reference or estimate")
            if stem not in energy:
                raise EvaluationError(
                    f"clip {entry.get('clip_id')!r} lacks energy flag for stem {stem}")
            score = nsdr_stem(entry["references"][stem], entry["estimates"][stem], cfg)
            rows.append(EvalRow(entry["clip_id"], entry["kit_id"], stem, score,
                                bool(energy[stem])))
    return EvalReport(rows)


# -- real-time ratio ----------------------------------------------------------


@dataclass
class RtrRow:
    clip_id: str
    duration: float
    compute_seconds: float

    @property
    def rtr(self) -> float:
        return self.compute_seconds / self.duration


@dataclass
class RtrReport:
    rows: List[RtrRow]

    @property
    def overall(self) -> float:
        """Total compute time over total audio duration."""
        total_audio = sum(r.duration for r in self.rows)
        return sum(r.compute_seconds for r in self.rows) / total_audio

    def to_json(self) -> str:
        return json.dumps({
            "rows": [{"clip_id": r.clip_id, "duration": r.duration,
                      "compute_seconds": r.compute_seconds, "rtr": r.rtr}
                     for r in self.rows],
            "overall": self.overall,
        }, indent=2, sort_keys=True)

    def render_text(self) -> str:
        lines = [f"{'clip':<20}{'audio s':>10}{'compute s':>12}{'RTR':>8}"]
        for r in self.rows:
            lines.append(f"{r.clip_id:<20}{r.duration:>10.2f}"
                         f"{r.compute_seconds:>12.2f}{r.rtr:>8.3f}")
        lines.append(f"{'overall':<20}{'':>10}{'':>12}{self.overall:>8.3f}")
        return "\n".join(lines)


def measure_rtr(separate_fn: Callable[[AudioClip], Dict[str, AudioClip]],
                clips: Sequence[tuple], clock: Callable[[], float] = time.perf_counter
                ) -> RtrReport:
    """Time `separate_fn` on (clip_id, AudioClip) pairs, already in memory.

    The clips are loaded by the caller so file I/O never enters the measured
    interval; `clock` is injectable for deterministic arithmetic tests.
    """
    rows = []
    for clip_id, clip in clips:
        if clip.num_samples == 0:
            raise EvaluationError(f"clip {clip_id!r} is empty")
        start = clock()
        separate_fn(clip)
        elapsed = clock() - start
        rows.append(RtrRow(clip_id, clip.duration, elapsed))
    if not rows:
        raise EvaluationError("no clips to measure")
    return RtrReport(rows)
