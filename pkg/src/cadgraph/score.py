"""Score model: notes, rests, parts, and timing metadata.

All positions and durations are integer ticks in a single global resolution
(`ticks_per_quarter`). Sounding intervals are half-open: a note occupies
[onset_tick, offset_tick).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ValidationError

CADENCE_CLASSES = ("no-cad", "PAC", "IAC", "HC")

_STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}


@dataclass(frozen=True)
class Pitch:
    """Spelled pitch. `alter` is a chromatic offset in semitones."""

    step: str
    alter: int = 0
    octave: int = 4

    def __post_init__(self):
        if self.step not in _STEP_SEMITONES:
            raise ValidationError(f"invalid pitch step {self.step!r}")
        if not -2 <= self.alter <= 2:
            raise ValidationError(f"pitch alter {self.alter} outside [-2, 2]")
        if not 0 <= self.octave <= 9:
            raise ValidationError(f"octave {self.octave} outside [0, 9]")
        if not 0 <= self.midi <= 127:
            raise ValidationError(f"pitch {self} maps to MIDI {self.midi} outside [0, 127]")

    @property
    def midi(self) -> int:
        return 12 * (self.octave + 1) + _STEP_SEMITONES[self.step] + self.alter


@dataclass(frozen=True)
class NoteEvent:
    id: str
    onset_tick: int
    duration_tick: int
    pitch: Pitch
    voice: int = 1
    staff: int = 1
    part_id: str = "P1"
    tie_prev: bool = False
    tie_next: bool = False

    def __post_init__(self):
        if self.onset_tick < 0:
            raise ValidationError(f"note {self.id!r}: negative onset {self.onset_tick}")
        if self.duration_tick <= 0:
            raise ValidationError(f"note {self.id!r}: non-positive duration {self.duration_tick}")
        if self.voice < 1 or self.staff < 1:
            raise ValidationError(f"note {self.id!r}: voice and staff must be >= 1")

    @property
    def offset_tick(self) -> int:
        return self.onset_tick + self.duration_tick

    @property
    def midi(self) -> int:
        return self.pitch.midi


@dataclass(frozen=True)
class RestEvent:
    onset_tick: int
    duration_tick: int
    voice: int = 1
    staff: int = 1
    part_id: str = "P1"

    def __post_init__(self):
        if self.onset_tick < 0:
            raise ValidationError(f"rest at {self.onset_tick}: negative onset")
        if self.duration_tick <= 0:
            raise ValidationError(f"rest at {self.onset_tick}: non-positive duration")

    @property
    def offset_tick(self) -> int:
        return self.onset_tick + self.duration_tick


def _note_sort_key(note: NoteEvent):
    return (note.onset_tick, note.part_id, note.voice, note.midi, note.id)


@dataclass(frozen=True)
class Score:
    """Parsed score. Construct through :meth:`Score.build`, which normalizes
    ordering and inserts the default meter."""

    parts: tuple[tuple[str, str], ...]
    notes: tuple[NoteEvent, ...]
    rests: tuple[RestEvent, ...]
    ticks_per_quarter: int
    time_signatures: tuple[tuple[int, int, int], ...]
    key_signatures: tuple[tuple[int, int], ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.ticks_per_quarter <= 0:
            raise ValidationError(f"ticks_per_quarter must be positive, got {self.ticks_per_quarter}")
        seen: set[str] = set()
        for note in self.notes:
            if note.id in seen:
                raise ValidationError(f"duplicate note id {note.id!r}")
            seen.add(note.id)
        if not any(t == 0 for t, _, _ in self.time_signatures):
            raise ValidationError("no time signature at tick 0")

    @classmethod
    def build(
        cls,
        parts,
        notes,
        rests,
        ticks_per_quarter,
        time_signatures=(),
        key_signatures=(),
        warnings=(),
    ) -> "Score":
        time_signatures = sorted(set(tuple(t) for t in time_signatures))
        if not any(t == 0 for t, _, _ in time_signatures):
            time_signatures.insert(0, (0, 4, 4))
        return cls(
            parts=tuple((str(pid), str(name)) for pid, name in parts),
            notes=tuple(sorted(notes, key=_note_sort_key)),
            rests=tuple(sorted(rests, key=lambda r: (r.onset_tick, r.part_id, r.voice))),
            ticks_per_quarter=int(ticks_per_quarter),
            time_signatures=tuple(time_signatures),
            key_signatures=tuple(sorted(set(tuple(k) for k in key_signatures))),
            warnings=tuple(warnings),
        )

    @property
    def note_by_id(self) -> dict[str, NoteEvent]:
        return {n.id: n for n in self.notes}

    def end_tick(self) -> int:
        end = 0
        for n in self.notes:
            end = max(end, n.offset_tick)
        for r in self.rests:
            end = max(end, r.offset_tick)
        return end


@dataclass(frozen=True)
class MeasureSpan:
    """One measure: [start, end) in ticks, under the given meter."""

    start: Fraction
    end: Fraction
    numerator: int
    denominator: int

    def contains(self, tick: int) -> bool:
        return self.start <= tick < self.end


def measure_spans(score: Score, end_tick: int | None = None) -> list[MeasureSpan]:
    """Derive measure boundaries from the time-signature list.

    A signature change opens a new measure at its own tick even if the
    previous measure is incomplete. The last span list covers at least
    `end_tick` (defaults to the score's end).
    """
    if end_tick is None:
        end_tick = score.end_tick()
    sigs = list(score.time_signatures)
    spans: list[MeasureSpan] = []
    for i, (start, num, den) in enumerate(sigs):
        region_end = sigs[i + 1][0] if i + 1 < len(sigs) else None
        measure_len = Fraction(num * 4 * score.ticks_per_quarter, den)
        if measure_len <= 0:
            raise ValidationError(f"time signature {num}/{den} yields empty measures")
        pos = Fraction(start)
        while True:
            if region_end is not None and pos >= region_end:
                break
            if region_end is None and pos >= end_tick and spans:
                break
            nxt = pos + measure_len
            if region_end is not None and nxt > region_end:
                nxt = Fraction(region_end)
            spans.append(MeasureSpan(pos, nxt, num, den))
            pos = nxt
            if region_end is None and pos >= end_tick:
                break
    if not spans:
        num, den = sigs[0][1], sigs[0][2]
        measure_len = Fraction(num * 4 * score.ticks_per_quarter, den)
        spans.append(MeasureSpan(Fraction(0), measure_len, num, den))
    return spans


def measure_of(spans: list[MeasureSpan], tick: int) -> tuple[int, MeasureSpan]:
    """Return (1-based measure number, span) for a tick."""
    for i, span in enumerate(spans):
        if span.contains(tick):
            return i + 1, span
    # Past the final barline: clamp to the last measure.
    return len(spans), spans[-1]


@dataclass(frozen=True)
class CadenceAnnotations:
    """Ground-truth cadence labels; notes absent from `labels` are 'no-cad'."""

    labels: dict[str, str]

    def __post_init__(self):
        for note_id, cls in self.labels.items():
            if cls not in CADENCE_CLASSES[1:]:
                raise ValidationError(f"unknown cadence class {cls!r} for note {note_id!r}")

    def class_of(self, note_id: str) -> str:
        return self.labels.get(note_id, CADENCE_CLASSES[0])

    def class_index_of(self, note_id: str) -> int:
        return CADENCE_CLASSES.index(self.class_of(note_id))
