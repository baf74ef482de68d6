"""Dataset construction: stem rendering, mixing, grouping, segmentation.

The mixture is always the exact sample-wise sum of its stems, and that
superposition is preserved through nine-to-five grouping and segmentation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .audio import AudioClip, PIPELINE_RATE, read_wav, write_wav
from .errors import ConfigError, EvaluationError, FileFormatError
from .midi import CANONICAL_NAMES, CANONICAL_PITCHES, MidiScore
from .sampler import DrumKitSampler

# five-stem grouping: stem id -> canonical pitches it sums
STEM_GROUPS: Dict[str, Tuple[int, ...]] = {
    "KD": (36,),
    "SD": (38,),
    "TT": (50, 47, 43),
    "HH": (42, 46),
    "CY": (49, 51),
}

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


@dataclass
class StemSet:
    """Nine aligned stems plus their exact-sum mixture."""

    stems: Dict[int, AudioClip]  # canonical pitch -> clip
    mixture: AudioClip
    score: Optional[MidiScore]
    kit_id: str
    energy: Dict[int, bool]  # True where at least one MIDI note is present


@dataclass
class FiveStemSet:
    stems: Dict[str, AudioClip]  # stem id -> clip
    mixture: AudioClip
    kit_id: str
    energy: Dict[str, bool]


def render_stems(score: MidiScore, sampler: DrumKitSampler,
                 min_duration: float = 0.0) -> StemSet:
    """Render each canonical instrument by additive one-shot placement."""
    sr = sampler.sample_rate
    tail = sampler.max_tail_samples()
    last_onset = max((ev.onset for ev in score.events), default=0.0)
    length = max(int(round(max(score.duration, min_duration) * sr)),
                 int(round(last_onset * sr)) + tail, 1)

    buffers = {pitch: np.zeros((2, length)) for pitch in CANONICAL_PITCHES}
    energy = {pitch: False for pitch in CANONICAL_PITCHES}
    for ev in score.events:
        if ev.pitch not in buffers:
            continue
        shot = sampler.one_shot(ev.pitch, ev.velocity)
        start = int(round(ev.onset * sr))
        stop = min(start + shot.shape[1], length)
        buffers[ev.pitch][:, start:stop] += shot[:, :stop - start]
        energy[ev.pitch] = True

    mixture = mixture_of_nine(buffers)
    stems = {pitch: AudioClip(buffers[pitch], sr) for pitch in CANONICAL_PITCHES}
    return StemSet(stems, AudioClip(mixture, sr), score, sampler.kit_id, energy)


def mixture_of_nine(stems: Dict[int, np.ndarray]) -> np.ndarray:
    """Sum nine stems with the grouped association tree.

    Using the same tree as the five-stem grouping keeps
    mixture == sum(grouped stems) bit-exact despite float non-associativity.
    """
    total = None
    for members in STEM_GROUPS.values():
        group = stems[members[0]]
        for pitch in members[1:]:
            group = group + stems[pitch]
        total = group if total is None else total + group
    return total


def group_to_five(stem_set: StemSet) -> FiveStemSet:
    """Sum the nine stems into the five target groups; flags OR together."""
    stems = {}
    energy = {}
    for stem_id, members in STEM_GROUPS.items():
        acc = np.zeros_like(stem_set.stems[members[0]].samples)
        for pitch in members:
            acc = acc + stem_set.stems[pitch].samples
        stems[stem_id] = AudioClip(acc, stem_set.mixture.sample_rate)
        energy[stem_id] = any(stem_set.energy[pitch] for pitch in members)
    return FiveStemSet(stems, stem_set.mixture.copy(), stem_set.kit_id, energy)


def segment_pairs(five: FiveStemSet, segment_samples: int, stride_samples: int
                  ) -> Iterator[Tuple[AudioClip, Dict[str, AudioClip], bool]]:
    """Aligned (mixture, stems, padded) windows across the clip."""
    if stride_samples <= 0:
        raise ConfigError(f"segment stride must be positive, got {stride_samples}")
    if segment_samples <= 0:
        raise ConfigError(f"segment length must be positive, got {segment_samples}")
    length = five.mixture.num_samples

    if length < segment_samples:
        pad = segment_samples - length
        mix = np.pad(five.mixture.samples, ((0, 0), (0, pad)))
        stems = {s: AudioClip(np.pad(c.samples, ((0, 0), (0, pad))))
                 for s, c in five.stems.items()}
        yield AudioClip(mix), stems, True
        return

    count = (length - segment_samples) // stride_samples + 1
    for i in range(count):
        start = i * stride_samples
        stop = start + segment_samples
        mix = AudioClip(five.mixture.samples[:, start:stop].copy())
        stems = {s: AudioClip(c.samples[:, start:stop].copy())
                 for s, c in five.stems.items()}
        yield mix, stems, False


# -- on-disk dataset ---------------------------------------------------------
#
# Layout: <root>/<kit-id>/<clip-id>/{kick,snare,hightom,lowmidtom,
# highfloortom,closedhh,openhh,crash,ride,mixture}.wav plus manifest.json
# at the root. Manifest fields per clip entry:
#   clip_id   unique identifier (derived from the MIDI file name)
#   kit_id    rendering kit
#   split     one of train / validation / test
#   duration  seconds of audio
#   dir       directory of the WAV files, relative to the manifest
#   energy    {stem id: true|false} from the MIDI annotation
#   energy_9  {canonical instrument name: true|false}

STEM_WAV_NAMES = {pitch: CANONICAL_NAMES[pitch] for pitch in CANONICAL_PITCHES}


@dataclass
class ClipEntry:
    clip_id: str
    kit_id: str
    split: str
    duration: float
    dir: str
    energy: Dict[str, bool]
    energy_9: Dict[str, bool]


@dataclass
class DatasetManifest:
    root: str
    clips: List[ClipEntry] = field(default_factory=list)

    def save(self):
        payload = {
            "version": MANIFEST_VERSION,
            "clips": [vars(c) for c in self.clips],
        }
        with open(os.path.join(self.root, MANIFEST_NAME), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        path = os.path.join(root, MANIFEST_NAME)
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("version") != MANIFEST_VERSION:
            raise FileFormatError(f"{path}: unsupported manifest version")
        clips = [ClipEntry(**c) for c in payload["clips"]]
        for clip in clips:
            if not os.path.isdir(os.path.join(root, clip.dir)):
                raise FileFormatError(f"{path}: missing clip directory {clip.dir}")
        return cls(root, clips)


def write_clip(root: str, clip_id: str, stem_set: StemSet, split: str = "train",
               encoding: str = "pcm16") -> ClipEntry:
    rel = os.path.join(stem_set.kit_id, clip_id)
    out_dir = os.path.join(root, rel)
    os.makedirs(out_dir, exist_ok=True)
    for pitch, clip in stem_set.stems.items():
        write_wav(os.path.join(out_dir, f"{STEM_WAV_NAMES[pitch]}.wav"), clip, encoding)
    write_wav(os.path.join(out_dir, "mixture.wav"), stem_set.mixture, encoding)

    five_energy = {sid: any(stem_set.energy[p] for p in members)
                   for sid, members in STEM_GROUPS.items()}
    return ClipEntry(
        clip_id=clip_id,
        kit_id=stem_set.kit_id,
        split=split,
        duration=stem_set.mixture.duration,
        dir=rel,
        energy=five_energy,
        energy_9={CANONICAL_NAMES[p]: v for p, v in stem_set.energy.items()},
    )


def load_clip_five(root: str, entry: ClipEntry) -> FiveStemSet:
    """Load a clip's five grouped stems; mixture recomputed as the exact sum."""
    out_dir = os.path.join(root, entry.dir)
    nine = {}
    for pitch, name in STEM_WAV_NAMES.items():
        path = os.path.join(out_dir, f"{name}.wav")
        if not os.path.isfile(path):
            raise EvaluationError(f"missing stem file {path}")
        nine[pitch] = read_wav(path)

    stems = {}
    for stem_id, members in STEM_GROUPS.items():
        acc = np.zeros_like(nine[members[0]].samples)
        for pitch in members:
            acc = acc + nine[pitch].samples
        stems[stem_id] = AudioClip(acc)
    mixture = np.zeros_like(next(iter(stems.values())).samples)
    for clip in stems.values():
        mixture += clip.samples
    return FiveStemSet(stems, AudioClip(mixture), entry.kit_id,
                       {k: bool(v) for k, v in entry.energy.items()})


def load_clip_mixture(root: str, entry: ClipEntry) -> AudioClip:
    return read_wav(os.path.join(root, entry.dir, "mixture.wav"))
