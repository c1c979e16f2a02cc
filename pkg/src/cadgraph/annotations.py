"""Cadence annotation loading.

Annotations are a JSON array of objects, either
{"note_id": "...", "class": "PAC"|"IAC"|"HC"} or
{"onset_tick": <int>, "class": ...}; the onset form labels every note
starting at that tick.
"""

from __future__ import annotations

import json

from .errors import ValidationError
from .score import CADENCE_CLASSES, CadenceAnnotations, Score


def load_annotations(data: bytes | str, score: Score) -> CadenceAnnotations:
    try:
        entries = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"annotation file is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ValidationError("annotation file must contain a JSON array")

    known_ids = {n.id for n in score.notes}
    by_onset: dict[int, list[str]] = {}
    for note in score.notes:
        by_onset.setdefault(note.onset_tick, []).append(note.id)

    labels: dict[str, str] = {}
    offenders: list[str] = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            offenders.append(f"entry {i}: not an object")
            continue
        cls = entry.get("class")
        if cls not in CADENCE_CLASSES[1:]:
            offenders.append(f"entry {i}: unknown class {cls!r}")
            continue
        if "note_id" in entry:
            note_id = entry["note_id"]
            if note_id not in known_ids:
                offenders.append(f"entry {i}: unknown note id {note_id!r}")
                continue
            labels[note_id] = cls
        elif "onset_tick" in entry:
            onset = entry["onset_tick"]
            ids = by_onset.get(onset)
            if not ids:
                offenders.append(f"entry {i}: no notes at onset_tick {onset}")
                continue
            for note_id in ids:
                labels[note_id] = cls
        else:
            offenders.append(f"entry {i}: needs note_id or onset_tick")
    if offenders:
        raise ValidationError("invalid annotations: " + "; ".join(offenders))
    return CadenceAnnotations(labels=labels)


def dump_annotations(annotations: CadenceAnnotations) -> bytes:
    entries = [{"note_id": nid, "class": cls} for nid, cls in sorted(annotations.labels.items())]
    return (json.dumps(entries, indent=1) + "\n").encode("utf-8")
