"""Shared test helpers: random score/graph factories and tiny checkpoints."""

from __future__ import annotations

import random

import numpy as np

from cadgraph.checkpoint import Checkpoint, ModelConfig, random_checkpoint, zero_checkpoint
from cadgraph.graph import RelationType, ScoreGraph
from cadgraph.score import NoteEvent, Pitch, RestEvent, Score

_STEPS = ["C", "D", "E", "F", "G", "A", "B"]


def random_score(seed: int, max_notes: int = 40) -> Score:
    """Arbitrary (non-musical) score: random onsets, durations, rests, and
    parts. Exercises all four edge predicates."""
    rng = random.Random(seed)
    n_parts = rng.randint(1, 3)
    parts = [(f"P{i + 1}", f"Part {i + 1}") for i in range(n_parts)]
    tpq = rng.choice([1, 2, 4, 6])
    n_notes = rng.randint(1, max_notes)
    notes = []
    per_part_counter = {pid: 0 for pid, _ in parts}
    for _ in range(n_notes):
        pid = rng.choice(parts)[0]
        part_no = int(pid[1:])
        k = per_part_counter[pid]
        per_part_counter[pid] += 1
        notes.append(NoteEvent(
            id=f"p{part_no}-{k}",
            onset_tick=rng.randint(0, 30),
            duration_tick=rng.randint(1, 8),
            pitch=Pitch(step=rng.choice(_STEPS), alter=rng.choice([-1, 0, 0, 0, 1]),
                        octave=rng.randint(2, 6)),
            voice=rng.randint(1, 2),
            staff=1,
            part_id=pid,
        ))
    rests = []
    for _ in range(rng.randint(0, 4)):
        rests.append(RestEvent(
            onset_tick=rng.randint(0, 36),
            duration_tick=rng.randint(1, 6),
            voice=1,
            staff=1,
            part_id=rng.choice(parts)[0],
        ))
    return Score.build(
        parts=parts,
        notes=notes,
        rests=rests,
        ticks_per_quarter=tpq,
        time_signatures=[(0, 4, 4)],
    )


def monophonic_score(seed: int, n_notes: int = 10) -> Score:
    """Single voice, non-overlapping notes with optional silent gaps covered
    by rests. Every node has per-relation in-degree of at most one."""
    rng = random.Random(seed)
    notes = []
    rests = []
    tick = 0
    for k in range(n_notes):
        dur = rng.randint(1, 4)
        notes.append(NoteEvent(
            id=f"p1-{k}", onset_tick=tick, duration_tick=dur,
            pitch=Pitch(step=rng.choice(_STEPS), octave=4),
            voice=1, staff=1, part_id="P1",
        ))
        tick += dur
        if rng.random() < 0.35:
            gap = rng.randint(1, 3)
            rests.append(RestEvent(onset_tick=tick, duration_tick=gap,
                                   voice=1, staff=1, part_id="P1"))
            tick += gap
    return Score.build(parts=[("P1", "Part 1")], notes=notes, rests=rests,
                       ticks_per_quarter=2, time_signatures=[(0, 4, 4)])


def random_graph(rng: np.random.Generator, n_nodes: int = 6,
                 n_features: int = 12) -> ScoreGraph:
    """Random ScoreGraph with arbitrary feature width for engine tests."""
    edges = {}
    for rel in RelationType:
        pairs = set()
        for _ in range(int(rng.integers(0, 2 * n_nodes))):
            s = int(rng.integers(0, n_nodes))
            d = int(rng.integers(0, n_nodes))
            if s != d:
                pairs.add((s, d))
        edges[rel] = tuple(sorted(pairs))
    return ScoreGraph(
        node_ids=tuple(f"n{i}" for i in range(n_nodes)),
        edges=edges,
        features=rng.uniform(0.0, 1.0, size=(n_nodes, n_features)),
        feature_names=tuple(f"f{i}" for i in range(n_features)),
        onsets=rng.integers(0, max(2, n_nodes // 2), size=n_nodes),
    )


def small_checkpoint(rng: np.random.Generator, in_dim: int, hidden: int = 8,
                     activation: str = "relu", norm: str = "l2") -> Checkpoint:
    config = ModelConfig(hidden_dim=hidden, activation=activation, norm=norm)
    return random_checkpoint(config, in_dim, rng, feature_spec="custom")


def zero_small_checkpoint(in_dim: int, hidden: int = 8) -> Checkpoint:
    return zero_checkpoint(ModelConfig(hidden_dim=hidden), in_dim, feature_spec="custom")


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0
