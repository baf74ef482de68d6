import pytest

from conftest import midi_file, midi_track, note_on, tempo_meta
from drumsep.errors import MidiParseError
from drumsep.midi import (
    CANONICAL_NAMES,
    CANONICAL_PITCHES,
    NOTE_MAP,
    map_notes,
    parse_midi,
)

# the full 22-row mapping: original pitch -> (instrument, canonical pitch)
EXPECTED_MAPPING = {
    36: ("kick", 36),
    38: ("snare", 38), 40: ("snare", 38), 37: ("snare", 38),
    48: ("hightom", 50), 50: ("hightom", 50),
    45: ("lowmidtom", 47), 47: ("lowmidtom", 47),
    43: ("highfloortom", 43), 58: ("highfloortom", 43),
    46: ("openhh", 46), 26: ("openhh", 46),
    42: ("closedhh", 42), 22: ("closedhh", 42), 44: ("closedhh", 42),
    49: ("crash", 49), 55: ("crash", 49), 57: ("crash", 49), 52: ("crash", 49),
    51: ("ride", 51), 59: ("ride", 51), 53: ("ride", 51),
}


def test_all_22_rows_and_image_set():
    assert NOTE_MAP == EXPECTED_MAPPING
    assert len(NOTE_MAP) == 22
    assert {c for _, c in NOTE_MAP.values()} == {36, 38, 50, 47, 43, 42, 46, 49, 51}
    assert set(CANONICAL_PITCHES) == {36, 38, 50, 47, 43, 42, 46, 49, 51}
    assert set(CANONICAL_NAMES) == set(CANONICAL_PITCHES)


def test_parse_simple_format0():
    # 480 ticks/quarter at default 120 BPM -> 1 tick = 1/960 s
    track = midi_track([
        (0, note_on(36, 100)),
        (480, note_on(38, 64)),
        (240, note_on(42, 32)),
    ])
    score = parse_midi(midi_file([track], fmt=0))
    assert [(e.pitch, e.velocity) for e in score.events] == [(36, 100), (38, 64), (42, 32)]
    assert score.events[0].onset == pytest.approx(0.0)
    assert score.events[1].onset == pytest.approx(0.5)
    assert score.events[2].onset == pytest.approx(0.75)
    assert score.duration == pytest.approx(0.75)


def test_tempo_change_hand_computed():
    """Tempo map oracle computed by hand.

    Division 100. Tempo starts at default 500000 us/qn (5000 us/tick).
    At tick 200 tempo becomes 250000 (2500 us/tick).
    Note A at tick 100 -> 100 * 5000 us = 0.5 s.
    Note B at tick 300 -> 200*5000 + 100*2500 = 1.25 s.
    """
    track = midi_track([
        (100, note_on(36, 90)),
        (100, tempo_meta(250000)),
        (100, note_on(38, 90)),
    ])
    score = parse_midi(midi_file([track], fmt=0, division=100))
    assert score.events[0].onset == pytest.approx(0.5)
    assert score.events[1].onset == pytest.approx(1.25)
    assert score.tempo_map == [(200, 250000)]


def test_format1_merges_tempo_track():
    tempo_track = midi_track([(0, tempo_meta(1000000))])  # 60 BPM from tick 0
    notes = midi_track([(480, note_on(36, 80))])
    score = parse_midi(midi_file([tempo_track, notes], fmt=1, division=480))
    assert score.events[0].onset == pytest.approx(1.0)


def test_running_status():
    # second note-on reuses the status byte
    body = bytes([0x00]) + note_on(36, 100) + bytes([0x60, 38, 90])
    body += bytes([0x00]) + b"\xff\x2f\x00"
    import struct
    track = b"MTrk" + struct.pack(">I", len(body)) + body
    score = parse_midi(midi_file([track], fmt=0, division=96))
    assert [e.pitch for e in score.events] == [36, 38]


def test_note_on_velocity_zero_is_ignored():
    track = midi_track([(0, note_on(36, 100)), (10, note_on(36, 0))])
    score = parse_midi(midi_file([track]))
    assert len(score.events) == 1


def test_rejections():
    with pytest.raises(MidiParseError):
        parse_midi(b"RIFFxxxx")  # not MIDI
    with pytest.raises(MidiParseError):
        parse_midi(midi_file([midi_track([])], fmt=2))  # format 2
    with pytest.raises(MidiParseError):
        parse_midi(midi_file([midi_track([])], division=0x8000 | 30))  # SMPTE
    with pytest.raises(MidiParseError):
        parse_midi(midi_file([midi_track([])], division=0))
    truncated = midi_file([midi_track([(0, note_on(36, 100))])])[:-3]
    with pytest.raises(MidiParseError):
        parse_midi(truncated)


def test_parse_error_carries_offset():
    try:
        parse_midi(b"MThd")
    except MidiParseError as exc:
        assert exc.offset is not None
        assert "offset" in str(exc)
    else:  # pragma: no cover
        pytest.fail("expected MidiParseError")


def test_map_notes_canonicalizes_and_reports_skips():
    track = midi_track([
        (0, note_on(40, 100)),   # -> snare 38
        (10, note_on(55, 90)),   # -> crash 49
        (10, note_on(41, 80)),   # unmapped (low floor tom variant not in table)
        (10, note_on(41, 70)),
    ])
    score = parse_midi(midi_file([track]))
    mapped, skipped = map_notes(score)
    assert [e.pitch for e in mapped.events] == [38, 49]
    assert mapped.events[0].velocity == 100
    assert dict(skipped) == {41: 2}
    assert mapped.duration == score.duration


def test_map_notes_every_row():
    events = [(i * 10, note_on(pitch, 64)) for i, pitch in enumerate(sorted(NOTE_MAP))]
    score = parse_midi(midi_file([midi_track(events)]))
    mapped, skipped = map_notes(score)
    assert not skipped
    got = [e.pitch for e in mapped.events]
    expected = [NOTE_MAP[p][1] for p in sorted(NOTE_MAP)]
    assert got == expected
