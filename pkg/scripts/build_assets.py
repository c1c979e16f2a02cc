#!/usr/bin/env python3
"""Regenerate the bundled assets: example pieces and the toy checkpoint.

Writes into src/cadgraph/assets/. Deterministic; safe to re-run.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from cadgraph.annotations import load_annotations
from cadgraph.checkpoint import ModelConfig, save_checkpoint
from cadgraph.graph import build_graph
from cadgraph.mei import export_mei
from cadgraph.model import TrainConfig, train
from cadgraph.score import NoteEvent, Pitch, RestEvent, Score
from cadgraph.synth import generate_corpus
from cadgraph.writers import write_musicxml

ASSETS = Path(__file__).resolve().parents[1] / "src" / "cadgraph" / "assets"


def _notes(part_id, staff, voice, start_counter, spec):
    """spec: list of (onset, dur, step, alter, octave)."""
    out = []
    for i, (onset, dur, step, alter, octave) in enumerate(spec):
        out.append(NoteEvent(
            id=f"{part_id.lower()}s{staff}v{voice}-{start_counter + i}",
            onset_tick=onset, duration_tick=dur,
            pitch=Pitch(step=step, alter=alter, octave=octave),
            voice=voice, staff=staff, part_id=part_id,
        ))
    return out


def adagio_f_minor() -> tuple[Score, list]:
    """8 bars of 6/8 in F minor, piano texture, authentic cadence in bar 8."""
    tpq = 6
    e = 3   # eighth
    dq = 9  # dotted quarter
    mel = []
    bars = [
        [("F", 0, 4), ("G", 0, 4), ("A", -1, 4), ("G", 0, 4), ("F", 0, 4), ("E", 0, 4)],
        [("F", 0, 4), ("B", -1, 4), ("A", -1, 4), ("G", 0, 4), ("F", 0, 4), ("E", -1, 4)],
        [("A", -1, 4), ("G", 0, 4), ("F", 0, 4), ("C", 0, 5), ("A", -1, 4), ("F", 0, 4)],
        [("E", 0, 4), ("F", 0, 4), ("G", 0, 4), ("C", 0, 4), ("D", 0, 4), ("E", 0, 4)],
        [("F", 0, 4), ("A", -1, 4), ("C", 0, 5), ("F", 0, 5), ("C", 0, 5), ("A", -1, 4)],
        [("D", -1, 5), ("C", 0, 5), ("B", -1, 4), ("A", -1, 4), ("G", 0, 4), ("F", 0, 4)],
        [("G", 0, 4), ("B", -1, 4), ("E", 0, 4), ("G", 0, 4), ("C", 0, 4), ("E", 0, 4)],
    ]
    for bar_index, bar in enumerate(bars):
        for slot, (step, alter, octave) in enumerate(bar):
            mel.append((bar_index * 18 + slot * e, e, step, alter, octave))
    mel.append((7 * 18, dq, "F", 0, 4))
    mel.append((7 * 18 + dq, e, "C", 0, 5))
    mel.append((7 * 18 + dq + e, e, "A", -1, 4))
    mel.append((7 * 18 + dq + 2 * e, e, "F", 0, 4))

    bass_bars = [
        [("F", 0, 2), ("C", 0, 3)],
        [("B", -1, 2), ("D", -1, 3)],
        [("F", 0, 2), ("C", 0, 3)],
        [("C", 0, 3), ("E", 0, 3)],
        [("F", 0, 2), ("A", -1, 2)],
        [("D", -1, 3), ("C", 0, 3)],
        [("C", 0, 3), ("B", -1, 2)],
    ]
    bass = []
    for bar_index, bar in enumerate(bass_bars):
        for half, (step, alter, octave) in enumerate(bar):
            bass.append((bar_index * 18 + half * dq, dq, step, alter, octave))
    bass.append((7 * 18, 18, "F", 0, 2))

    notes = _notes("P1", 1, 1, 0, mel) + _notes("P1", 2, 2, 0, bass)
    score = Score.build(
        parts=[("P1", "Piano")],
        notes=notes,
        rests=[],
        ticks_per_quarter=tpq,
        time_signatures=[(0, 6, 8)],
        key_signatures=[(0, -4)],
    )
    annotations = [{"onset_tick": 7 * 18, "class": "PAC"}]
    return score, annotations


def fugue_d_major() -> tuple[Score, list]:
    """6 bars of 4/4 in D major, two imitative voices, arrivals on bars 3/6."""
    tpq = 4
    q = 4
    e = 2
    upper = [
        (0, e, "D", 0, 4), (e, e, "E", 0, 4), (2 * e, e, "F", 1, 4), (3 * e, e, "G", 0, 4),
        (8, q, "A", 0, 4), (12, e, "F", 1, 4), (14, e, "G", 0, 4),
        (16, e, "A", 0, 4), (18, e, "B", 0, 4), (20, q, "C", 1, 5), (24, e, "D", 0, 5),
        (26, e, "C", 1, 5), (28, e, "B", 0, 4), (30, e, "C", 1, 5),
        (32, q, "A", 0, 4), (36, e, "B", 0, 4), (38, e, "C", 1, 5),
        (40, q, "D", 0, 5), (44, q, "E", 0, 5),
        (48, e, "F", 1, 5), (50, e, "E", 0, 5), (52, e, "D", 0, 5), (54, e, "C", 1, 5),
        (56, q, "B", 0, 4), (60, q, "C", 1, 5),
        (64, q, "D", 0, 5), (68, q, "A", 0, 4), (72, 8, "A", 0, 4),
        (80, 16, "A", 0, 4),
    ]
    lower = [
        (32, e, "D", 0, 3), (34, e, "E", 0, 3), (36, e, "F", 1, 3), (38, e, "G", 0, 3),
        (40, q, "A", 0, 3), (44, e, "F", 1, 3), (46, e, "G", 0, 3),
        (48, q, "D", 0, 3), (52, q, "A", 0, 2),
        (56, e, "E", 0, 3), (58, e, "F", 1, 3), (60, e, "G", 0, 3), (62, e, "E", 0, 3),
        (64, q, "F", 1, 3), (68, q, "G", 0, 3),
        (72, q, "A", 0, 2), (76, q, "E", 0, 3),
        (80, 16, "D", 0, 3),
    ]
    notes = _notes("P1", 1, 1, 0, upper) + _notes("P2", 1, 1, 0, lower)
    score = Score.build(
        parts=[("P1", "Voice 1"), ("P2", "Voice 2")],
        notes=notes,
        rests=[RestEvent(onset_tick=0, duration_tick=32, voice=1, staff=1, part_id="P2")],
        ticks_per_quarter=tpq,
        time_signatures=[(0, 4, 4)],
        key_signatures=[(0, 2)],
    )
    annotations = [
        {"onset_tick": 32, "class": "IAC"},
        {"onset_tick": 80, "class": "IAC"},
    ]
    return score, annotations


def nocturne_c_minor() -> tuple[Score, list]:
    """6 bars of slow 4/4 in C minor, melody over block chords, cadence in bar 5."""
    tpq = 2
    q = 2
    h = 4
    mel = [
        (0, h, "G", 0, 4), (4, q, "A", -1, 4), (6, q, "G", 0, 4),
        (8, h, "E", -1, 4), (12, h, "C", 0, 4),
        (16, q, "F", 0, 4), (18, q, "A", -1, 4), (20, h, "D", 0, 4),
        (24, h, "E", -1, 4), (28, q, "D", 0, 4), (30, q, "B", -1, 3),
        (32, 8, "C", 0, 4),
        (40, h, "G", 0, 4), (44, h, "C", 0, 5),
    ]
    chords = [
        (0, h, [("C", 0, 3), ("E", -1, 3), ("G", 0, 3)]),
        (4, h, [("C", 0, 3), ("E", -1, 3), ("G", 0, 3)]),
        (8, h, [("A", -1, 2), ("C", 0, 3), ("E", -1, 3)]),
        (12, h, [("F", 0, 2), ("C", 0, 3), ("A", -1, 3)]),
        (16, h, [("F", 0, 2), ("A", -1, 2), ("D", 0, 3)]),
        (20, h, [("G", 0, 2), ("B", 0, 2), ("D", 0, 3)]),
        (24, h, [("G", 0, 2), ("B", 0, 2), ("F", 0, 3)]),
        (28, h, [("G", 0, 2), ("B", 0, 2), ("F", 0, 3)]),
        (32, 8, [("C", 0, 3), ("E", -1, 3), ("G", 0, 3)]),
        (40, 8, [("C", 0, 3), ("G", 0, 3)]),
    ]
    chord_spec = []
    for onset, dur, members in chords:
        for step, alter, octave in members:
            chord_spec.append((onset, dur, step, alter, octave))
    notes = _notes("P1", 1, 1, 0, mel) + _notes("P1", 2, 2, 0, chord_spec)
    score = Score.build(
        parts=[("P1", "Piano")],
        notes=notes,
        rests=[],
        ticks_per_quarter=tpq,
        time_signatures=[(0, 4, 4)],
        key_signatures=[(0, -3)],
    )
    annotations = [{"onset_tick": 32, "class": "PAC"}]
    return score, annotations


def write_pieces() -> None:
    pieces_dir = ASSETS / "pieces"
    pieces_dir.mkdir(parents=True, exist_ok=True)
    for name, builder in [
        ("adagio_f_minor", adagio_f_minor),
        ("fugue_d_major", fugue_d_major),
        ("nocturne_c_minor", nocturne_c_minor),
    ]:
        score, annotations = builder()
        xml = write_musicxml(score)
        (pieces_dir / f"{name}.musicxml").write_bytes(xml)
        (pieces_dir / f"{name}.mei").write_bytes(export_mei(score))
        ann_bytes = (json.dumps(annotations, indent=1) + "\n").encode()
        load_annotations(ann_bytes, score)  # validate against the score
        (pieces_dir / f"{name}.cadences.json").write_bytes(ann_bytes)
        print(f"wrote {name}: {len(score.notes)} notes")


def train_toy_checkpoint() -> None:
    seed, n_pieces, epochs = 7, 200, 50
    corpus = generate_corpus(seed, n_pieces)
    pairs = [(build_graph(p.score), p.annotations) for p in corpus.pieces]
    t0 = time.time()
    result = train(pairs, TrainConfig(seed=seed, epochs=epochs, learning_rate=0.5),
                   ModelConfig(hidden_dim=64))
    elapsed = time.time() - t0
    data = save_checkpoint(result.checkpoint)
    (ASSETS / "toy_checkpoint.json").write_bytes(data)
    final = result.history[-1]
    metrics = {
        "seed": seed,
        "n_pieces": n_pieces,
        "epochs": epochs,
        "learning_rate": 0.5,
        "hidden_dim": 64,
        "val_macro_f1": final["val_macro_f1"],
        "final_loss": final["loss"],
        "train_seconds": round(elapsed, 1),
        "class_counts": corpus.class_counts,
    }
    (ASSETS / "toy_checkpoint_metrics.json").write_text(
        json.dumps(metrics, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"toy checkpoint: val_macro_f1={final['val_macro_f1']:.4f} "
          f"({elapsed:.0f}s, {len(data) / 1e6:.2f} MB)")


if __name__ == "__main__":
    write_pieces()
    train_toy_checkpoint()
