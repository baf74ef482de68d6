"""Standard MIDI File reader (formats 0/1) and the 22-row drum note mapping.

Only note-on events matter for percussion, so note-offs are ignored. Tick
times are converted to seconds through the merged tempo map of all tracks.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .errors import MidiParseError

DEFAULT_TEMPO = 500000  # microseconds per quarter note (120 BPM)

# original pitch -> (canonical instrument name, canonical pitch)
NOTE_MAP: Dict[int, Tuple[str, int]] = {
    36: ("kick", 36),
    38: ("snare", 38),
    40: ("snare", 38),
    37: ("snare", 38),
    48: ("hightom", 50),
    50: ("hightom", 50),
    45: ("lowmidtom", 47),
    47: ("lowmidtom", 47),
    43: ("highfloortom", 43),
    58: ("highfloortom", 43),
    46: ("openhh", 46),
    26: ("openhh", 46),
    42: ("closedhh", 42),
    22: ("closedhh", 42),
    44: ("closedhh", 42),
    49: ("crash", 49),
    55: ("crash", 49),
    57: ("crash", 49),
    52: ("crash", 49),
    51: ("ride", 51),
    59: ("ride", 51),
    53: ("ride", 51),
}

CANONICAL_PITCHES = (36, 38, 50, 47, 43, 42, 46, 49, 51)

CANONICAL_NAMES: Dict[int, str] = {
    36: "kick", 38: "snare", 50: "hightom", 47: "lowmidtom", 43: "highfloortom",
    42: "closedhh", 46: "openhh", 49: "crash", 51: "ride",
}


@dataclass(frozen=True)
class NoteEvent:
    onset: float  # seconds
    pitch: int
    velocity: int


@dataclass
class MidiScore:
    events: List[NoteEvent] = field(default_factory=list)
    duration: float = 0.0
    tempo_map: List[Tuple[int, int]] = field(default_factory=list)  # (tick, us/quarter)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MidiParseError("unexpected end of data", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.bytes(1)[0]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.u8()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MidiParseError("variable-length quantity longer than 4 bytes", self.pos)


def _parse_track(r: _Reader):
    """Returns (note_ons [(tick, pitch, vel)], tempos [(tick, usq)], end_tick)."""
    notes = []
    tempos = []
    tick = 0
    status = None
    while True:
        tick += r.varlen()
        b = r.u8()
        if b >= 0x80:
            status = b
            if b < 0xF0:
                data1 = r.u8()
            else:
                data1 = None
        else:
            if status is None or status >= 0xF0:
                raise MidiParseError("running status without prior channel status", r.pos - 1)
            data1 = b

        if status == 0xFF:
            meta_type = r.u8()
            length = r.varlen()
            body = r.bytes(length)
            if meta_type == 0x2F:
                return notes, tempos, tick
            if meta_type == 0x51:
                if length != 3:
                    raise MidiParseError(f"tempo meta event of length {length}", r.pos)
                tempos.append((tick, int.from_bytes(body, "big")))
            continue
        if status in (0xF0, 0xF7):
            r.bytes(r.varlen())
            continue
        if status >= 0xF0:
            raise MidiParseError(f"unsupported system message 0x{status:02x}", r.pos - 1)

        kind = status & 0xF0
        if kind in (0xC0, 0xD0):  # program change / channel pressure: 1 data byte
            continue
        data2 = r.u8()
        if kind == 0x90 and data2 > 0:
            notes.append((tick, data1, data2))


class _TempoMap:
    def __init__(self, tempos: List[Tuple[int, int]], division: int):
        self.division = division
        self.points = []  # (tick, seconds_at_tick, us_per_quarter)
        tempos = sorted(tempos)
        current = DEFAULT_TEMPO
        tick = 0
        seconds = 0.0
        self.points.append((0, 0.0, current))
        for t_tick, usq in tempos:
            seconds += (t_tick - tick) * current / (division * 1e6)
            tick = t_tick
            current = usq
            self.points.append((tick, seconds, current))

    def seconds(self, tick: int) -> float:
        base_tick, base_sec, usq = self.points[0]
        for p in self.points:
            if p[0] <= tick:
                base_tick, base_sec, usq = p
            else:
                break
        return base_sec + (tick - base_tick) * usq / (self.division * 1e6)


def parse_midi(data: bytes) -> MidiScore:
    """Parse SMF bytes into a score of note-on events with absolute onsets."""
    r = _Reader(data)
    if r.bytes(4) != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    (header_len,) = struct.unpack(">I", r.bytes(4))
    if header_len < 6:
        raise MidiParseError(f"MThd length {header_len} < 6", r.pos)
    fmt, ntrks, division = struct.unpack(">HHH", r.bytes(6))
    r.bytes(header_len - 6)
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}; only 0 and 1 are handled", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiParseError("zero ticks-per-quarter division", 12)

    all_notes = []
    all_tempos = []
    end_ticks = []
    for _ in range(ntrks):
        if r.bytes(4) != b"MTrk":
            raise MidiParseError("missing MTrk chunk", r.pos - 4)
        (length,) = struct.unpack(">I", r.bytes(4))
        track = _Reader(r.data, r.pos)
        notes, tempos, end_tick = _parse_track(track)
        if track.pos > r.pos + length:
            raise MidiParseError("track events overrun declared chunk length", track.pos)
        r.pos += length
        all_notes.extend(notes)
        all_tempos.extend(tempos)
        end_ticks.append(end_tick)

    tempo_map = _TempoMap(all_tempos, division)
    events = sorted(
        (NoteEvent(tempo_map.seconds(tick), pitch, vel) for tick, pitch, vel in all_notes),
        key=lambda e: (e.onset, e.pitch),
    )
    duration = max((tempo_map.seconds(t) for t in end_ticks), default=0.0)
    if events:
        duration = max(duration, events[-1].onset)
    return MidiScore(events=events, duration=duration,
                     tempo_map=[(t, u) for t, u in sorted(all_tempos)] or [(0, DEFAULT_TEMPO)])


def map_notes(score: MidiScore, note_map: Dict[int, Tuple[str, int]] = NOTE_MAP
              ) -> Tuple[MidiScore, Counter]:
    """Re-pitch every event to its canonical instrument.

    Pitches outside the mapping table are skipped; the returned counter
    reports how many events were dropped per unknown pitch.
    """
    events = []
    skipped: Counter = Counter()
    for ev in score.events:
        if ev.pitch in note_map:
            events.append(NoteEvent(ev.onset, note_map[ev.pitch][1], ev.velocity))
        else:
            skipped[ev.pitch] += 1
    mapped = MidiScore(events=events, duration=score.duration, tempo_map=list(score.tempo_map))
    return mapped, skipped
