"""Procedural drum pattern generator producing scores on a 16th-note grid.

Used by the synthesis command and the reduced end-to-end experiment. Each
pattern activates a random subset of the five stem groups, so a corpus of
patterns contains clips where individual stems are genuinely silent.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from .errors import ConfigError
from .midi import MidiScore, NoteEvent

# per canonical pitch: probability of a hit at each 16th-note position
_HIT_DENSITY: Dict[int, float] = {
    36: 0.30,  # kick
    38: 0.25,  # snare
    50: 0.08, 47: 0.08, 43: 0.08,  # toms
    42: 0.45, 46: 0.10,  # hi-hats
    49: 0.05, 51: 0.20,  # cymbals
}

_GROUPS: Dict[str, Tuple[int, ...]] = {
    "KD": (36,), "SD": (38,), "TT": (50, 47, 43), "HH": (42, 46), "CY": (49, 51),
}


def make_pattern(seed: int, bars: int = 2, tempo_bpm: float = 120.0,
                 p_group_active: float = 0.6) -> MidiScore:
    """One random pattern; each stem group is active with p_group_active."""
    if bars < 1:
        raise ConfigError(f"bars must be >= 1, got {bars}")
    rng = np.random.default_rng(seed)

    # at least two active groups: a one-stem clip equals its own mixture,
    # which makes mixture-relative evaluation degenerate
    while True:
        active_groups = [g for g in _GROUPS if rng.random() < p_group_active]
        if len(active_groups) >= 2:
            break
    active_pitches = [p for g in active_groups for p in _GROUPS[g]]

    steps = bars * 16
    step_seconds = 60.0 / tempo_bpm / 4.0
    events: List[NoteEvent] = []
    for pitch in active_pitches:
        placed = False
        for step in range(steps):
            if rng.random() < _HIT_DENSITY[pitch]:
                velocity = int(rng.integers(60, 121))
                events.append(NoteEvent(step * step_seconds, pitch, velocity))
                placed = True
        if not placed:  # an active instrument contributes at least one hit
            step = int(rng.integers(steps))
            events.append(NoteEvent(step * step_seconds, pitch, int(rng.integers(60, 121))))

    events.sort(key=lambda ev: (ev.onset, ev.pitch))
    return MidiScore(events=events, duration=steps * step_seconds)


def make_patterns(num_patterns: int, seed: int = 0, bars: int = 2,
                  tempo_bpm: float = 120.0) -> List[Tuple[str, MidiScore]]:
    return [(f"pattern{i:03d}", make_pattern(seed * 10007 + i, bars, tempo_bpm))
            for i in range(num_patterns)]
