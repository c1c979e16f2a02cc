"""MusicXML (uncompressed, score-partwise) import."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET

from .errors import ScoreParseError, UnsupportedFormatError, ValidationError
from .score import NoteEvent, Pitch, RestEvent, Score


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _text(elem: ET.Element | None) -> str | None:
    if elem is None or elem.text is None:
        return None
    return elem.text.strip()


def _int_text(elem: ET.Element | None, what: str) -> int:
    value = _text(elem)
    if value is None:
        raise ValidationError(f"missing {what}")
    try:
        return int(value)
    except ValueError as exc:
        raise ValidationError(f"non-integer {what}: {value!r}") from exc


def _collect_divisions(root: ET.Element) -> list[int]:
    divisions = []
    for elem in root.iter():
        if _localname(elem.tag) == "divisions":
            value = _int_text(elem, "divisions")
            if value <= 0:
                raise ValidationError(f"divisions must be positive, got {value}")
            divisions.append(value)
    return divisions


def parse_musicxml(data: bytes) -> Score:
    """Parse an uncompressed score-partwise MusicXML document.

    All durations are renormalized to a single global tick unit, the least
    common multiple of every <divisions> value in the document. Chord members
    share their onset; <backup> and <forward> move the part cursor. Grace
    notes and ornaments carry no tick duration and are skipped with a warning.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position if exc.position else (None, None)
        raise ScoreParseError(f"malformed XML: {exc.msg if hasattr(exc, 'msg') else exc}",
                              line=line, column=column) from exc

    root_name = _localname(root.tag)
    if root_name == "score-timewise":
        raise UnsupportedFormatError("score-timewise documents are not supported; use score-partwise")
    if root_name != "score-partwise":
        raise UnsupportedFormatError(f"unsupported root element <{root_name}>")

    divisions_seen = _collect_divisions(root)
    if not divisions_seen:
        raise ValidationError("document declares no <divisions>; durations are undefined")
    tpq = math.lcm(*divisions_seen)

    part_names: dict[str, str] = {}
    for score_part in root.iter():
        if _localname(score_part.tag) != "score-part":
            continue
        pid = score_part.get("id", "")
        name = None
        for child in score_part:
            if _localname(child.tag) == "part-name":
                name = _text(child)
        part_names[pid] = name or pid

    warnings: list[str] = []
    notes: list[NoteEvent] = []
    rests: list[RestEvent] = []
    time_signatures: dict[int, tuple[int, int]] = {}
    key_signatures: dict[int, int] = {}
    parts: list[tuple[str, str]] = []

    part_elems = [e for e in root if _localname(e.tag) == "part"]
    if not part_elems:
        raise ValidationError("document has no <part> elements")

    for part_index, part in enumerate(part_elems, start=1):
        part_id = part.get("id") or f"P{part_index}"
        parts.append((part_id, part_names.get(part_id, part_id)))
        cursor = 0  # current position in global ticks
        factor = None  # ticks per <divisions> unit
        note_counter = 0
        last_onset = 0

        for measure in part:
            if _localname(measure.tag) != "measure":
                continue
            for elem in measure:
                tag = _localname(elem.tag)
                if tag == "attributes":
                    for attr in elem:
                        atag = _localname(attr.tag)
                        if atag == "divisions":
                            factor = tpq // _int_text(attr, "divisions")
                        elif atag == "time":
                            beats = beat_type = None
                            for t in attr:
                                if _localname(t.tag) == "beats":
                                    beats = _int_text(t, "time beats")
                                elif _localname(t.tag) == "beat-type":
                                    beat_type = _int_text(t, "time beat-type")
                            if beats and beat_type:
                                prev = time_signatures.get(cursor)
                                if prev is not None and prev != (beats, beat_type):
                                    warnings.append(
                                        f"conflicting time signatures at tick {cursor}; keeping {prev[0]}/{prev[1]}")
                                else:
                                    time_signatures[cursor] = (beats, beat_type)
                        elif atag == "key":
                            for t in attr:
                                if _localname(t.tag) == "fifths":
                                    fifths = _int_text(t, "key fifths")
                                    prev = key_signatures.get(cursor)
                                    if prev is not None and prev != fifths:
                                        warnings.append(
                                            f"conflicting key signatures at tick {cursor}; keeping {prev}")
                                    else:
                                        key_signatures[cursor] = fifths
                elif tag == "backup":
                    dur = None
                    for t in elem:
                        if _localname(t.tag) == "duration":
                            dur = _int_text(t, "backup duration")
                    if dur is None:
                        raise ValidationError(f"part {part_id}: <backup> without duration")
                    if factor is None:
                        raise ValidationError(f"part {part_id}: <backup> before any <divisions>")
                    cursor -= dur * factor
                    if cursor < 0:
                        raise ValidationError(f"part {part_id}: <backup> moves cursor before tick 0")
                elif tag == "forward":
                    dur = None
                    for t in elem:
                        if _localname(t.tag) == "duration":
                            dur = _int_text(t, "forward duration")
                    if dur is None:
                        raise ValidationError(f"part {part_id}: <forward> without duration")
                    if factor is None:
                        raise ValidationError(f"part {part_id}: <forward> before any <divisions>")
                    cursor += dur * factor
                elif tag == "note":
                    children = {_localname(c.tag): c for c in elem}
                    if "grace" in children:
                        warnings.append(f"part {part_id}: grace note skipped at tick {cursor}")
                        continue
                    if factor is None:
                        raise ValidationError(f"part {part_id}: note before any <divisions>")
                    duration_elem = children.get("duration")
                    if duration_elem is None:
                        raise ValidationError(f"part {part_id}: note without duration at tick {cursor}")
                    duration = _int_text(duration_elem, "note duration") * factor

                    notations = children.get("notations")
                    if notations is not None:
                        for n in notations:
                            if _localname(n.tag) == "ornaments":
                                warnings.append(
                                    f"part {part_id}: ornament skipped on note at tick {cursor}")

                    voice = 1
                    if "voice" in children:
                        voice = _int_text(children["voice"], "voice")
                    staff = 1
                    if "staff" in children:
                        staff = _int_text(children["staff"], "staff")

                    is_chord = "chord" in children
                    onset = last_onset if is_chord else cursor

                    if "rest" in children:
                        rests.append(RestEvent(onset_tick=onset, duration_tick=duration,
                                               voice=voice, staff=staff, part_id=part_id))
                    elif "pitch" in children:
                        pitch_elem = children["pitch"]
                        step = alter = octave = None
                        for p in pitch_elem:
                            ptag = _localname(p.tag)
                            if ptag == "step":
                                step = _text(p)
                            elif ptag == "alter":
                                alter_text = _text(p)
                                alter = int(float(alter_text)) if alter_text else 0
                            elif ptag == "octave":
                                octave = _int_text(p, "octave")
                        if step is None or octave is None:
                            raise ValidationError(f"part {part_id}: incomplete <pitch> at tick {cursor}")
                        tie_prev = tie_next = False
                        for t in elem:
                            if _localname(t.tag) == "tie":
                                if t.get("type") == "start":
                                    tie_next = True
                                elif t.get("type") == "stop":
                                    tie_prev = True
                        notes.append(NoteEvent(
                            id=f"p{part_index}-{note_counter}",
                            onset_tick=onset,
                            duration_tick=duration,
                            pitch=Pitch(step=step, alter=alter or 0, octave=octave),
                            voice=voice,
                            staff=staff,
                            part_id=part_id,
                            tie_prev=tie_prev,
                            tie_next=tie_next,
                        ))
                        note_counter += 1
                    else:
                        warnings.append(f"part {part_id}: note without pitch or rest at tick {cursor}")
                        continue

                    if not is_chord:
                        last_onset = onset
                        cursor += duration

    return Score.build(
        parts=parts,
        notes=notes,
        rests=rests,
        ticks_per_quarter=tpq,
        time_signatures=[(t, n, d) for t, (n, d) in time_signatures.items()],
        key_signatures=[(t, f) for t, f in key_signatures.items()],
        warnings=warnings,
    )
