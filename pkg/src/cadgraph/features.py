"""Per-note input features ("base-v1", 40 dimensions, all in [0, 1]).

Sonority-style features look at the set of notes sounding at an onset
(held notes included), which is also what the lowest/highest flags and the
interval-to-lowest one-hot are measured against.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .score import Score, measure_of, measure_spans

_PC_NAMES = [f"pc_{i}" for i in range(12)]
_OCTAVE_NAMES = [f"octave_{i}" for i in range(1, 8)]
_INTERVAL_NAMES = [f"interval_to_lowest_{i}" for i in range(12)]

BASE_V1_NAMES: tuple[str, ...] = tuple(
    _PC_NAMES
    + _OCTAVE_NAMES
    + ["duration_log2_beats", "is_downbeat", "metrical_strength",
       "is_lowest_at_onset", "is_highest_at_onset"]
    + _INTERVAL_NAMES
    + ["sonority_major_triad", "sonority_dominant_seventh",
       "resolves_up_semitone", "preceded_by_dominant_seventh"]
)

FEATURE_SPECS = {"base-v1": BASE_V1_NAMES}


def feature_names(spec_name: str) -> tuple[str, ...]:
    try:
        return FEATURE_SPECS[spec_name]
    except KeyError:
        raise ValidationError(f"unknown feature spec {spec_name!r}") from None


def _sonority_flags(relative_pcs: set[int]) -> tuple[bool, bool]:
    major = relative_pcs == {0, 4, 7}
    dom7 = relative_pcs in ({0, 4, 7, 10}, {0, 4, 10})
    return major, dom7


def extract_features(score: Score, spec) -> tuple[np.ndarray, tuple[str, ...]]:
    name = getattr(spec, "name", spec)
    names = feature_names(name)
    notes = score.notes
    n = len(notes)
    matrix = np.zeros((n, len(names)), dtype=np.float64)
    col = {fname: i for i, fname in enumerate(names)}

    tpq = score.ticks_per_quarter
    spans = measure_spans(score)

    onsets = sorted({note.onset_tick for note in notes})
    onset_rank = {t: i for i, t in enumerate(onsets)}
    sounding_at: dict[int, list[int]] = {t: [] for t in onsets}
    for i, note in enumerate(notes):
        for t in onsets:
            if note.onset_tick <= t < note.offset_tick:
                sounding_at[t].append(i)

    lowest_at: dict[int, int] = {}
    highest_at: dict[int, int] = {}
    sonority: dict[int, tuple[bool, bool]] = {}
    for t in onsets:
        midis = [notes[i].midi for i in sounding_at[t]]
        lowest_at[t] = min(midis)
        highest_at[t] = max(midis)
        bass_pc = lowest_at[t] % 12
        relative = {(m - bass_pc) % 12 for m in midis}
        sonority[t] = _sonority_flags(relative)

    starts_at: dict[int, list[int]] = {}
    for i, note in enumerate(notes):
        starts_at.setdefault(note.onset_tick, []).append(i)

    for i, note in enumerate(notes):
        t = note.onset_tick
        matrix[i, col[f"pc_{note.midi % 12}"]] = 1.0
        octave = min(7, max(1, note.midi // 12 - 1))
        matrix[i, col[f"octave_{octave}"]] = 1.0

        beats = note.duration_tick / tpq
        log_dur = min(3.0, max(-3.0, math.log2(beats)))
        matrix[i, col["duration_log2_beats"]] = (log_dur + 3.0) / 6.0

        _, span = measure_of(spans, t)
        position = Fraction(t) - span.start
        beat_len = Fraction(4 * tpq, span.denominator)
        measure_len = span.numerator * beat_len
        if position == 0:
            strength = 1.0
        elif span.numerator % 2 == 0 and position == measure_len / 2:
            strength = 0.5
        elif position % beat_len == 0:
            strength = 0.25
        else:
            strength = 0.0
        matrix[i, col["is_downbeat"]] = 1.0 if position == 0 else 0.0
        matrix[i, col["metrical_strength"]] = strength

        matrix[i, col["is_lowest_at_onset"]] = 1.0 if note.midi == lowest_at[t] else 0.0
        matrix[i, col["is_highest_at_onset"]] = 1.0 if note.midi == highest_at[t] else 0.0
        interval = (note.midi - lowest_at[t]) % 12
        matrix[i, col[f"interval_to_lowest_{interval}"]] = 1.0

        major, dom7 = sonority[t]
        matrix[i, col["sonority_major_triad"]] = 1.0 if major else 0.0
        matrix[i, col["sonority_dominant_seventh"]] = 1.0 if dom7 else 0.0

        for j in starts_at.get(note.offset_tick, ()):
            if notes[j].midi == note.midi + 1:
                matrix[i, col["resolves_up_semitone"]] = 1.0
                break

        rank = onset_rank[t]
        if rank > 0 and sonority[onsets[rank - 1]][1]:
            matrix[i, col["preceded_by_dominant_seventh"]] = 1.0

    return matrix, names
