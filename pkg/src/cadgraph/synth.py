"""Rule-based four-voice corpus with planted cadence patterns.

Each piece is a short homophonic phrase (8 to 16 chord onsets, quarter-note
pulse, 4/4) in a random major key. The final two onsets realize one of the
planted endings:

  PAC   root-position dominant seventh to root-position tonic with the
        soprano on the tonic
  IAC   either the same arrival with the soprano on the third or fifth,
        or a first-inversion dominant triad into the tonic
  HC    supertonic into a root-position dominant triad as the last chord
  none  a plagal or deceptive close that matches no pattern

Cadence labels are attached to every note of the arrival onset. Mid-phrase
chords avoid dominants entirely so no unlabeled onset resembles a planted
pattern. Occasional held notes and whole-texture rests add during and rest
edges. Generation is fully determined by the seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .score import CadenceAnnotations, NoteEvent, Pitch, RestEvent, Score

PARTS = (("S", "Soprano"), ("A", "Alto"), ("T", "Tenor"), ("B", "Bass"))
VOICE_RANGES = {"S": (60, 81), "A": (53, 74), "T": (46, 67), "B": (38, 60)}
VOICE_CENTERS = {"S": 70, "A": 63, "T": 56, "B": 48}
TPQ = 4

# Diatonic triads as semitone offsets from the tonic; no dominants here.
_LEAD_CHORDS = {
    "I": (0, 4, 7),
    "ii": (2, 5, 9),
    "iii": (4, 7, 11),
    "IV": (5, 9, 0),
    "vi": (9, 0, 4),
}

_PC_TO_STEP = {
    0: ("C", 0), 1: ("C", 1), 2: ("D", 0), 3: ("E", -1), 4: ("E", 0), 5: ("F", 0),
    6: ("F", 1), 7: ("G", 0), 8: ("A", -1), 9: ("A", 0), 10: ("B", -1), 11: ("B", 0),
}


def _pitch_from_midi(midi: int) -> Pitch:
    step, alter = _PC_TO_STEP[midi % 12]
    octave = midi // 12 - 1
    if not 0 <= octave <= 9:
        raise ValueError(f"midi {midi} out of writable range")
    return Pitch(step=step, alter=alter, octave=octave)


def _nearest(pc: int, previous: int, lo: int, hi: int) -> int:
    candidates = [m for m in range(lo, hi + 1) if m % 12 == pc]
    if not candidates:
        # Range squeezed shut by a voice below; take the first fit above it.
        candidates = [m for m in range(lo, lo + 12) if m % 12 == pc]
    return min(candidates, key=lambda m: (abs(m - previous), m))


def _fifths_for_tonic(pc: int) -> int:
    return ((pc * 7 + 6) % 12) - 6


@dataclass
class SynthPiece:
    score: Score
    annotations: CadenceAnnotations
    pattern: str


@dataclass
class CorpusResult:
    pieces: list[SynthPiece]
    class_counts: dict[str, int] = field(default_factory=dict)

    def as_pairs(self) -> list[tuple[Score, CadenceAnnotations]]:
        return [(p.score, p.annotations) for p in self.pieces]


def _cadence_slots(pattern: str, rng: random.Random):
    """Returns the last two chords as {voice: pc-offset} maps and the label."""
    if pattern == "PAC":
        return ({"B": 7, "T": 5, "A": 2, "S": 11},
                {"B": 0, "T": 4, "A": 7, "S": 0}, "PAC")
    if pattern == "IAC":
        if rng.random() < 0.5:
            # Dominant seventh with the soprano landing on the third or fifth.
            soprano_end = rng.choice([4, 7])
            other = 7 if soprano_end == 4 else 4
            return ({"B": 7, "T": 11, "A": 2, "S": 5},
                    {"B": 0, "T": 0, "A": other, "S": soprano_end}, "IAC")
        # First-inversion dominant triad, soprano reaching the tonic.
        return ({"B": 11, "T": 7, "A": 2, "S": 7},
                {"B": 0, "T": 7, "A": 4, "S": 0}, "IAC")
    if pattern == "HC":
        return ({"B": 2, "T": 5, "A": 9, "S": 5},
                {"B": 7, "T": 2, "A": 11, "S": 7}, "HC")
    # Plagal or deceptive close; never matches a planted pattern.
    if rng.random() < 0.5:
        return ({"B": 0, "T": 4, "A": 7, "S": 0},
                {"B": 5, "T": 5, "A": 9, "S": 0}, None)
    return ({"B": 2, "T": 5, "A": 9, "S": 2},
            {"B": 9, "T": 4, "A": 9, "S": 0}, None)


def generate_piece(rng: random.Random, pattern: str) -> SynthPiece:
    tonic = rng.randrange(12)
    n_slots = rng.randint(8, 16)

    slot_chords: list[dict[str, int]] = []
    for _ in range(n_slots - 2):
        name = rng.choice(sorted(_LEAD_CHORDS))
        tones = _LEAD_CHORDS[name]
        upper = list(tones)
        rng.shuffle(upper)
        slot_chords.append({"B": tones[0], "S": upper[0], "A": upper[1], "T": upper[2]})
    penult, final, label = _cadence_slots(pattern, rng)
    slot_chords.append(penult)
    slot_chords.append(final)

    rest_slot = None
    if n_slots >= 10 and rng.random() < 0.3:
        rest_slot = rng.randint(2, n_slots - 5)

    holds: set[tuple[str, int]] = set()
    for slot in range(1, n_slots - 3):
        if rest_slot is not None and slot in (rest_slot - 1, rest_slot, rest_slot + 1):
            continue
        for voice in ("A", "T"):
            if (voice, slot - 1) not in holds and rng.random() < 0.12:
                holds.add((voice, slot))

    slot_ticks: list[int] = []
    tick = 0
    rest_tick = None
    for slot in range(n_slots):
        if slot == rest_slot:
            rest_tick = tick
            tick += TPQ
        slot_ticks.append(tick)
        tick += TPQ

    notes: list[NoteEvent] = []
    rests: list[RestEvent] = []
    counters = {pid: 0 for pid, _ in PARTS}
    previous = dict(VOICE_CENTERS)
    arrival_ids: list[str] = []

    for slot in range(n_slots):
        duration = 2 * TPQ if slot == n_slots - 1 else TPQ
        floor = None
        # Realize bottom-up so voices never cross and the planted bass stays
        # the lowest sounding note.
        for pid in ("B", "T", "A", "S"):
            if (pid, slot - 1) in holds:
                floor = previous[pid]
                continue
            pc = (tonic + slot_chords[slot][pid]) % 12
            lo, hi = VOICE_RANGES[pid]
            if floor is not None:
                lo = max(lo, floor + 1)
            midi = _nearest(pc, previous[pid], lo, hi)
            previous[pid] = midi
            floor = midi
            dur = duration
            if (pid, slot) in holds:
                dur = 2 * TPQ
            note_id = f"{pid}-n{counters[pid]}"
            counters[pid] += 1
            notes.append(NoteEvent(
                id=note_id,
                onset_tick=slot_ticks[slot],
                duration_tick=dur,
                pitch=_pitch_from_midi(midi),
                voice=1,
                staff=1,
                part_id=pid,
            ))
            if slot == n_slots - 1:
                arrival_ids.append(note_id)

    if rest_tick is not None:
        for pid, _name in PARTS:
            rests.append(RestEvent(onset_tick=rest_tick, duration_tick=TPQ,
                                   voice=1, staff=1, part_id=pid))

    score = Score.build(
        parts=PARTS,
        notes=notes,
        rests=rests,
        ticks_per_quarter=TPQ,
        time_signatures=[(0, 4, 4)],
        key_signatures=[(0, _fifths_for_tonic(tonic))],
    )
    labels = {nid: label for nid in arrival_ids} if label else {}
    return SynthPiece(score=score, annotations=CadenceAnnotations(labels=labels),
                      pattern=pattern)


def generate_corpus(seed: int, n_pieces: int,
                    mixture: dict[str, float] | None = None) -> CorpusResult:
    if n_pieces < 1:
        raise ValueError("n_pieces must be >= 1")
    mixture = mixture or {"PAC": 0.3, "IAC": 0.25, "HC": 0.25, "none": 0.2}
    rng = random.Random(seed)
    patterns = sorted(mixture)
    weights = [mixture[p] for p in patterns]
    pieces = []
    counts = {p: 0 for p in patterns}
    for _ in range(n_pieces):
        pattern = rng.choices(patterns, weights=weights, k=1)[0]
        counts[pattern] += 1
        pieces.append(generate_piece(rng, pattern))
    return CorpusResult(pieces=pieces, class_counts=counts)


def synth_corpus(seed: int, n_pieces: int) -> list[tuple[Score, CadenceAnnotations]]:
    return generate_corpus(seed, n_pieces).as_pairs()


def onset_form_annotations(piece: SynthPiece) -> list[dict]:
    """Annotations as onset entries, which survive format conversions that
    do not preserve note ids (labels always cover whole onsets here)."""
    by_id = piece.score.note_by_id
    entries = {(by_id[nid].onset_tick, cls) for nid, cls in piece.annotations.labels.items()}
    return [{"onset_tick": onset, "class": cls} for onset, cls in sorted(entries)]
