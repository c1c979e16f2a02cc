"""Score graph construction: four typed relations over note vertices.

Edges, for distinct notes x and y (intervals are half-open):

  onset        onset(x) == onset(y), stored in both directions
  consecutive  offset(x) == onset(y)
  during       onset(x) < onset(y) < offset(x)
  rest         offset(x) == start and onset(y) == end of a silent span
               covered by notated rests

Silent spans are, by default, maximal intervals where no note in any part
is sounding and at least one RestEvent covers every tick; contiguous rests
merge into one span. Set merge_rest_spans=False to emit edges around each
individual rest event instead.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .score import Score


class RelationType(enum.IntEnum):
    ONSET = 0
    CONSECUTIVE = 1
    DURING = 2
    REST = 3

    @property
    def key(self) -> str:
        return self.name.lower()


RELATION_NAMES = {r: r.key for r in RelationType}
RELATIONS_BY_NAME = {r.key: r for r in RelationType}


@dataclass(frozen=True)
class FeatureSpec:
    """Named feature recipe; names come back in a deterministic order."""

    name: str = "base-v1"


@dataclass
class ScoreGraph:
    node_ids: tuple[str, ...]
    edges: dict[RelationType, tuple[tuple[int, int], ...]]
    features: np.ndarray
    feature_names: tuple[str, ...]
    onsets: np.ndarray

    def __post_init__(self):
        n = len(self.node_ids)
        if self.features.shape[0] != n or len(self.onsets) != n:
            raise ValidationError("feature matrix and onset vector must have one row per node")
        if self.features.shape[1] != len(self.feature_names):
            raise ValidationError("feature_names length must match feature columns")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("features contain non-finite values")
        for rel, pairs in self.edges.items():
            seen = set()
            for src, dst in pairs:
                if src == dst:
                    raise ValidationError(f"self-loop ({src},{dst}) in relation {rel.key}")
                if not (0 <= src < n and 0 <= dst < n):
                    raise ValidationError(f"edge ({src},{dst}) out of range in {rel.key}")
                if (src, dst) in seen:
                    raise ValidationError(f"duplicate edge ({src},{dst}) in {rel.key}")
                seen.add((src, dst))

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def index_of(self, note_id: str) -> int:
        try:
            return self.node_ids.index(note_id)
        except ValueError:
            raise ValidationError(f"unknown note id {note_id!r}") from None


def _silent_spans(score: Score, merge: bool) -> list[tuple[int, int]]:
    sounding = _merge_intervals([(n.onset_tick, n.offset_tick) for n in score.notes])
    if not merge:
        spans = []
        for rest in score.rests:
            if not _overlaps_any(sounding, rest.onset_tick, rest.offset_tick):
                spans.append((rest.onset_tick, rest.offset_tick))
        return sorted(set(spans))
    covered = _merge_intervals([(r.onset_tick, r.offset_tick) for r in score.rests])
    spans = []
    for a, b in covered:
        spans.extend(_subtract(a, b, sounding))
    return spans


def _merge_intervals(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[tuple[int, int]] = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def _overlaps_any(intervals: list[tuple[int, int]], a: int, b: int) -> bool:
    return any(x < b and a < y for x, y in intervals)


def _subtract(a: int, b: int, holes: list[tuple[int, int]]) -> list[tuple[int, int]]:
    pieces = []
    pos = a
    for x, y in holes:
        if y <= pos or x >= b:
            continue
        if x > pos:
            pieces.append((pos, min(x, b)))
        pos = max(pos, y)
        if pos >= b:
            break
    if pos < b:
        pieces.append((pos, b))
    return pieces


def build_graph(score: Score, spec: FeatureSpec | None = None,
                merge_rest_spans: bool = True) -> ScoreGraph:
    """Build the typed score graph plus the node feature matrix."""
    from .features import extract_features

    if not score.notes:
        raise ValidationError("cannot build a graph from a score with no notes")
    spec = spec or FeatureSpec()
    notes = score.notes
    n = len(notes)

    by_onset: dict[int, list[int]] = {}
    for i, note in enumerate(notes):
        by_onset.setdefault(note.onset_tick, []).append(i)

    onset_edges: list[tuple[int, int]] = []
    for group in by_onset.values():
        for i in group:
            for j in group:
                if i != j:
                    onset_edges.append((i, j))

    consecutive_edges: list[tuple[int, int]] = []
    for i, note in enumerate(notes):
        for j in by_onset.get(note.offset_tick, ()):
            if i != j:
                consecutive_edges.append((i, j))

    # Notes are sorted by onset, so candidate targets form a contiguous range.
    onsets_sorted = np.array([note.onset_tick for note in notes], dtype=np.int64)
    during_edges: list[tuple[int, int]] = []
    for i, note in enumerate(notes):
        lo = int(np.searchsorted(onsets_sorted, note.onset_tick, side="right"))
        hi = int(np.searchsorted(onsets_sorted, note.offset_tick, side="left"))
        for j in range(lo, hi):
            if i != j:
                during_edges.append((i, j))

    rest_edges: list[tuple[int, int]] = []
    ends: dict[int, list[int]] = {}
    for i, note in enumerate(notes):
        ends.setdefault(note.offset_tick, []).append(i)
    for a, b in _silent_spans(score, merge_rest_spans):
        for i in ends.get(a, ()):
            for j in by_onset.get(b, ()):
                if i != j:
                    rest_edges.append((i, j))

    edges = {
        RelationType.ONSET: tuple(sorted(set(onset_edges))),
        RelationType.CONSECUTIVE: tuple(sorted(set(consecutive_edges))),
        RelationType.DURING: tuple(sorted(set(during_edges))),
        RelationType.REST: tuple(sorted(set(rest_edges))),
    }

    features, feature_names = extract_features(score, spec)
    return ScoreGraph(
        node_ids=tuple(note.id for note in notes),
        edges=edges,
        features=features,
        feature_names=feature_names,
        onsets=np.array([note.onset_tick for note in notes], dtype=np.int64),
    )


def oracle_edges(score: Score, merge_rest_spans: bool = True
                 ) -> dict[RelationType, set[tuple[int, int]]]:
    """Reference edge computation: test every ordered note pair directly,
    plus a boundary-by-boundary timeline sweep for silent spans. Kept free
    of the sorted-range shortcuts used by build_graph."""
    notes = score.notes
    result: dict[RelationType, set[tuple[int, int]]] = {r: set() for r in RelationType}
    for i, x in enumerate(notes):
        for j, y in enumerate(notes):
            if i == j:
                continue
            if x.onset_tick == y.onset_tick:
                result[RelationType.ONSET].add((i, j))
            if x.offset_tick == y.onset_tick:
                result[RelationType.CONSECUTIVE].add((i, j))
            if x.onset_tick < y.onset_tick < x.offset_tick:
                result[RelationType.DURING].add((i, j))

    if merge_rest_spans:
        boundaries = sorted(
            {n.onset_tick for n in notes} | {n.offset_tick for n in notes}
            | {r.onset_tick for r in score.rests} | {r.offset_tick for r in score.rests})
        spans: list[tuple[int, int]] = []
        current_start = None
        for a, b in zip(boundaries, boundaries[1:]):
            silent = not any(n.onset_tick < b and a < n.offset_tick for n in notes)
            covered = any(r.onset_tick < b and a < r.offset_tick for r in score.rests)
            if silent and covered:
                if current_start is None:
                    current_start = a
            else:
                if current_start is not None:
                    spans.append((current_start, a))
                    current_start = None
        if current_start is not None:
            spans.append((current_start, boundaries[-1]))
    else:
        spans = []
        for rest in score.rests:
            if not any(n.onset_tick < rest.offset_tick and rest.onset_tick < n.offset_tick
                       for n in notes):
                spans.append((rest.onset_tick, rest.offset_tick))

    for a, b in spans:
        for i, x in enumerate(notes):
            for j, y in enumerate(notes):
                if i != j and x.offset_tick == a and y.onset_tick == b:
                    result[RelationType.REST].add((i, j))
    return result


def graph_to_json(graph: ScoreGraph) -> dict:
    return {
        "node_ids": list(graph.node_ids),
        "edges": {rel.key: [[s, d] for s, d in graph.edges[rel]] for rel in RelationType},
        "feature_names": list(graph.feature_names),
        "features": [float(v) for v in graph.features.reshape(-1)],
        "onsets": [int(v) for v in graph.onsets],
    }


def graph_from_json(payload: dict | str | bytes) -> ScoreGraph:
    if isinstance(payload, (str, bytes)):
        payload = json.loads(payload)
    node_ids = tuple(payload["node_ids"])
    names = tuple(payload["feature_names"])
    features = np.array(payload["features"], dtype=np.float64).reshape(len(node_ids), len(names))
    edges = {
        RELATIONS_BY_NAME[key]: tuple((int(s), int(d)) for s, d in pairs)
        for key, pairs in payload["edges"].items()
    }
    for rel in RelationType:
        edges.setdefault(rel, ())
    return ScoreGraph(
        node_ids=node_ids,
        edges=edges,
        features=features,
        feature_names=names,
        onsets=np.array(payload["onsets"], dtype=np.int64),
    )
