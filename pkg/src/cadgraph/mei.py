"""MEI 4 subset export and import.

The exported subset carries exact timing alongside the notated values:
`scoreDef@ppq` declares the tick resolution, every event carries
`@tstamp.ges` (ticks since the start of its measure) and `@dur.ppq`
(duration in ticks), while `@dur`/`@dots` hold the closest notated value
for engraving. Gaps are padded with <space>/<mSpace> so that real rests
survive a round trip as <rest> elements. Every note's xml:id equals its
NoteEvent id, which is what lets an SVG rendering map back to the model.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from fractions import Fraction

from .errors import ScoreParseError, UnsupportedFormatError, ValidationError
from .score import NoteEvent, Pitch, RestEvent, Score, measure_spans

_XML_ID = "{http://www.w3.org/XML/1998/namespace}id"
_NCNAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9._-]*$")

# Notated duration symbols and their length in quarter notes.
_DUR_QUARTERS = (
    ("long", Fraction(16)),
    ("breve", Fraction(8)),
    ("1", Fraction(4)),
    ("2", Fraction(2)),
    ("4", Fraction(1)),
    ("8", Fraction(1, 2)),
    ("16", Fraction(1, 4)),
    ("32", Fraction(1, 8)),
    ("64", Fraction(1, 16)),
    ("128", Fraction(1, 32)),
)
_QUARTERS_BY_DUR = dict(_DUR_QUARTERS)

_ALTER_TO_ACCID = {-2: "ff", -1: "f", 0: None, 1: "s", 2: "ss"}
_ACCID_TO_ALTER = {"ff": -2, "f": -1, "n": 0, "s": 1, "ss": 2, "x": 2}


def _notated_duration(ticks: int, tpq: int) -> tuple[str, int]:
    """Best (dur, dots) for a tick duration; exact when representable."""
    target = Fraction(ticks, tpq)
    for dur, quarters in _DUR_QUARTERS:
        for dots in range(0, 5):
            if quarters * (2 - Fraction(1, 2**dots)) == target:
                return dur, dots
    for dur, quarters in _DUR_QUARTERS:
        if quarters <= target:
            return dur, 0
    return "128", 0


def _duration_from_notation(dur: str, dots: int, tpq: int) -> int:
    quarters = _QUARTERS_BY_DUR.get(dur)
    if quarters is None:
        raise ValidationError(f"unsupported @dur value {dur!r}")
    ticks = tpq * quarters * (2 - Fraction(1, 2**dots))
    if ticks.denominator != 1:
        raise ValidationError(f"@dur {dur!r} with {dots} dots is not integral at ppq {tpq}")
    return int(ticks)


def sanitize_ids(ids: list[str]) -> tuple[dict[str, str], list[str]]:
    """Map ids onto valid, unique XML NCNames. Returns (mapping, warnings)."""
    mapping: dict[str, str] = {}
    taken: set[str] = set()
    warnings: list[str] = []
    for raw in ids:
        candidate = raw
        if not _NCNAME_RE.match(candidate):
            candidate = re.sub(r"[^A-Za-z0-9._-]", "_", candidate)
            if not candidate or not re.match(r"^[A-Za-z_]", candidate):
                candidate = "n" + candidate
        if candidate in taken:
            base = candidate
            k = 2
            while f"{base}_{k}" in taken:
                k += 1
            candidate = f"{base}_{k}"
        if candidate != raw:
            warnings.append(f"note id {raw!r} sanitized to {candidate!r}")
        mapping[raw] = candidate
        taken.add(candidate)
    return mapping, warnings


def _escape(text: str, quote: bool = False) -> str:
    text = text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    if quote:
        text = text.replace('"', "&quot;")
    return text


class _Writer:
    def __init__(self):
        self.lines: list[str] = ['<?xml version="1.0" encoding="UTF-8"?>']
        self.depth = 0

    def _fmt(self, tag: str, attrs) -> str:
        parts = [tag]
        for key, value in attrs:
            if value is not None:
                parts.append(f'{key}="{_escape(str(value), quote=True)}"')
        return " ".join(parts)

    def open(self, tag: str, attrs=()):
        self.lines.append("  " * self.depth + f"<{self._fmt(tag, attrs)}>")
        self.depth += 1

    def close(self, tag: str):
        self.depth -= 1
        self.lines.append("  " * self.depth + f"</{tag}>")

    def leaf(self, tag: str, attrs=(), text: str | None = None):
        head = "  " * self.depth + f"<{self._fmt(tag, attrs)}"
        if text is None:
            self.lines.append(head + "/>")
        else:
            self.lines.append(head + f">{_escape(text)}</{tag}>")

    def bytes(self) -> bytes:
        return ("\n".join(self.lines) + "\n").encode("utf-8")


def _keysig_attr(fifths: int) -> str:
    if fifths == 0:
        return "0"
    return f"{abs(fifths)}{'s' if fifths > 0 else 'f'}"


def _parse_keysig_attr(value: str) -> int:
    if value in ("0", ""):
        return 0
    m = re.match(r"^(\d+)([sf])$", value)
    if not m:
        raise ValidationError(f"unsupported @keysig value {value!r}")
    n = int(m.group(1))
    return n if m.group(2) == "s" else -n


def _staff_layout(score: Score) -> tuple[list[tuple[str, str, int]], dict[tuple[str, int], int]]:
    """Global staff numbering: one block of staves per part, in part order.

    Returns ([(part_id, name, n_staves)], {(part_id, local_staff): global_n}).
    """
    max_staff: dict[str, int] = {pid: 1 for pid, _ in score.parts}
    for event in list(score.notes) + list(score.rests):
        if event.part_id not in max_staff:
            raise ValidationError(f"event references unknown part {event.part_id!r}")
        max_staff[event.part_id] = max(max_staff[event.part_id], event.staff)
    layout = []
    numbering: dict[tuple[str, int], int] = {}
    counter = 0
    for pid, name in score.parts:
        layout.append((pid, name, max_staff[pid]))
        for local in range(1, max_staff[pid] + 1):
            counter += 1
            numbering[(pid, local)] = counter
    return layout, numbering


def _clef_for(score: Score, part_id: str, staff: int) -> tuple[str, str]:
    pitches = [n.midi for n in score.notes if n.part_id == part_id and n.staff == staff]
    if pitches and sum(pitches) / len(pitches) < 57:
        return "F", "4"
    return "G", "2"


def export_mei(
    score: Score,
    predictions: dict[str, str] | None = None,
    roman: dict[int, str] | None = None,
) -> bytes:
    """Serialize a Score to the MEI subset. Output is byte-deterministic.

    `predictions` maps note id to a cadence class; classes other than
    "no-cad" are written as <harm> elements anchored to the first predicted
    note of each onset. `roman` maps onset ticks to analysis text anchored
    to the first note at that onset.
    """
    tpq = score.ticks_per_quarter
    spans = measure_spans(score)
    for span in spans[:-1]:
        natural = Fraction(span.numerator * 4 * tpq, span.denominator)
        if span.end - span.start != natural:
            raise ValidationError(
                f"time signature change at tick {span.end} is not on a measure boundary")
    for span in spans:
        if span.start.denominator != 1 or span.end.denominator != 1:
            raise ValidationError("meter produces non-integral measure boundaries")

    id_map, _warnings = sanitize_ids([n.id for n in score.notes])
    layout, staff_numbers = _staff_layout(score)
    part_index = {pid: i + 1 for i, (pid, _, _) in enumerate(layout)}

    key_by_tick = dict(score.key_signatures)

    w = _Writer()
    w.open("mei", [("xmlns", "http://www.music-encoding.org/ns/mei"), ("meiversion", "4.0.1")])
    w.open("meiHead")
    w.open("fileDesc")
    w.open("titleStmt")
    w.leaf("title", (), "Score")
    w.close("titleStmt")
    w.leaf("pubStmt")
    w.close("fileDesc")
    w.close("meiHead")
    w.open("music")
    w.open("body")
    w.open("mdiv")
    w.open("score")

    first = spans[0]
    scoredef_attrs = [
        ("ppq", tpq),
        ("meter.count", first.numerator),
        ("meter.unit", first.denominator),
    ]
    if 0 in key_by_tick:
        scoredef_attrs.append(("keysig", _keysig_attr(key_by_tick[0])))
    w.open("scoreDef", scoredef_attrs)
    w.open("staffGrp")
    pid_map, _ = sanitize_ids([pid for pid, _, _ in layout])
    for pid, name, n_staves in layout:
        w.open("staffGrp", [("xml:id", f"part-{pid_map[pid]}"), ("label", name)])
        for local in range(1, n_staves + 1):
            shape, line = _clef_for(score, pid, local)
            w.leaf("staffDef", [
                ("n", staff_numbers[(pid, local)]),
                ("lines", 5),
                ("clef.shape", shape),
                ("clef.line", line),
            ])
        w.close("staffGrp")
    w.close("staffGrp")
    w.close("scoreDef")
    w.open("section")

    notes_by_cell: dict[tuple[str, int, int], list[NoteEvent]] = {}
    rests_by_cell: dict[tuple[str, int, int], list[RestEvent]] = {}
    for n in score.notes:
        notes_by_cell.setdefault((n.part_id, n.staff, n.voice), []).append(n)
    for r in score.rests:
        rests_by_cell.setdefault((r.part_id, r.staff, r.voice), []).append(r)

    first_note_at_onset: dict[int, NoteEvent] = {}
    for n in score.notes:
        first_note_at_onset.setdefault(n.onset_tick, n)

    current_meter = (first.numerator, first.denominator)
    for measure_no, span in enumerate(spans, start=1):
        m_start = int(span.start)
        change_attrs = []
        if (span.numerator, span.denominator) != current_meter:
            change_attrs.extend([("meter.count", span.numerator), ("meter.unit", span.denominator)])
            current_meter = (span.numerator, span.denominator)
        if m_start != 0 and m_start in key_by_tick:
            change_attrs.append(("keysig", _keysig_attr(key_by_tick[m_start])))
        if change_attrs:
            w.leaf("scoreDef", change_attrs)
        w.open("measure", [("n", measure_no)])
        harms: list[tuple[int, str, str]] = []

        for pid, _name, n_staves in layout:
            for local in range(1, n_staves + 1):
                w.open("staff", [("n", staff_numbers[(pid, local)])])
                voices = sorted(
                    {v for (p, s, v) in notes_by_cell if p == pid and s == local}
                    | {v for (p, s, v) in rests_by_cell if p == pid and s == local}
                ) or [1]
                wrote_any = False
                for voice in voices:
                    cell_notes = [n for n in notes_by_cell.get((pid, local, voice), ())
                                  if span.contains(n.onset_tick)]
                    cell_rests = [r for r in rests_by_cell.get((pid, local, voice), ())
                                  if span.contains(r.onset_tick)]
                    if not cell_notes and not cell_rests:
                        continue
                    wrote_any = True
                    w.open("layer", [("n", voice)])
                    _write_layer(w, cell_notes, cell_rests, m_start, tpq, id_map)
                    w.close("layer")
                if not wrote_any:
                    w.open("layer", [("n", 1)])
                    w.leaf("mSpace")
                    w.close("layer")
                w.close("staff")

        if roman:
            for onset in sorted(roman):
                if span.contains(onset) and onset in first_note_at_onset:
                    anchor = first_note_at_onset[onset]
                    harms.append((onset, id_map[anchor.id], roman[onset]))
        if predictions:
            by_onset_class: dict[tuple[int, str], NoteEvent] = {}
            for n in score.notes:
                cls = predictions.get(n.id, "no-cad")
                if cls != "no-cad" and span.contains(n.onset_tick):
                    by_onset_class.setdefault((n.onset_tick, cls), n)
            for (onset, cls), anchor in sorted(by_onset_class.items()):
                harms.append((onset, id_map[anchor.id], cls))
        for onset, anchor_id, text in harms:
            w.leaf("harm", [("startid", f"#{anchor_id}")], text)
        w.close("measure")

    w.close("section")
    w.close("score")
    w.close("mdiv")
    w.close("body")
    w.close("music")
    w.close("mei")
    return w.bytes()


def _write_layer(w: _Writer, notes: list[NoteEvent], rests: list[RestEvent],
                 m_start: int, tpq: int, id_map: dict[str, str]) -> None:
    events: list[tuple[int, int, str, object]] = []
    chords: dict[tuple[int, int], list[NoteEvent]] = {}
    for n in sorted(notes, key=lambda n: (n.onset_tick, n.duration_tick, n.midi, n.id)):
        chords.setdefault((n.onset_tick, n.duration_tick), []).append(n)
    for (onset, dur), members in sorted(chords.items()):
        events.append((onset, dur, "notes", members))
    for r in rests:
        events.append((r.onset_tick, r.duration_tick, "rest", r))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    cursor = m_start
    for onset, dur, kind, payload in events:
        if onset > cursor:
            gap = onset - cursor
            gdur, gdots = _notated_duration(gap, tpq)
            w.leaf("space", [("dur", gdur)] + ([("dots", gdots)] if gdots else [])
                   + [("dur.ppq", gap), ("tstamp.ges", cursor - m_start)])
            cursor = onset
        ndur, ndots = _notated_duration(dur, tpq)
        common = [("dur", ndur)] + ([("dots", ndots)] if ndots else []) \
            + [("dur.ppq", dur), ("tstamp.ges", onset - m_start)]
        if kind == "rest":
            w.leaf("rest", common)
        else:
            members: list[NoteEvent] = payload
            if len(members) == 1:
                w.leaf("note", [("xml:id", id_map[members[0].id])] + common
                       + _pitch_attrs(members[0]) + _tie_attr(members[0]))
            else:
                w.open("chord", common)
                for member in members:
                    w.leaf("note", [("xml:id", id_map[member.id])]
                           + _pitch_attrs(member) + _tie_attr(member))
                w.close("chord")
        cursor = max(cursor, onset + dur)


def _pitch_attrs(note: NoteEvent):
    attrs = [("pname", note.pitch.step.lower()), ("oct", note.pitch.octave)]
    accid = _ALTER_TO_ACCID[note.pitch.alter]
    if accid:
        attrs.append(("accid.ges", accid))
    return attrs


def _tie_attr(note: NoteEvent):
    if note.tie_prev and note.tie_next:
        return [("tie", "m")]
    if note.tie_next:
        return [("tie", "i")]
    if note.tie_prev:
        return [("tie", "t")]
    return []


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_mei(data: bytes) -> Score:
    """Parse a document written by :func:`export_mei` (or the same subset).

    xml:ids become NoteEvent ids; a note without one gets the deterministic
    synthetic id "p{part_number}-{counter}".
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position if exc.position else (None, None)
        raise ScoreParseError(f"malformed XML: {exc}", line=line, column=column) from exc
    if _local(root.tag) != "mei":
        raise UnsupportedFormatError(f"expected <mei> root, found <{_local(root.tag)}>")

    warnings: list[str] = []
    scoredef = None
    section = None
    for elem in root.iter():
        name = _local(elem.tag)
        if name == "scoreDef" and scoredef is None:
            scoredef = elem
        elif name == "section" and section is None:
            section = elem
    if scoredef is None or section is None:
        raise ValidationError("document lacks <scoreDef> or <section>")

    tpq_attr = scoredef.get("ppq")
    if tpq_attr is None:
        warnings.append("scoreDef has no @ppq; assuming 480 ticks per quarter")
        tpq = 480
    else:
        tpq = int(tpq_attr)
        if tpq <= 0:
            raise ValidationError(f"@ppq must be positive, got {tpq}")

    meter = (int(scoredef.get("meter.count", 4)), int(scoredef.get("meter.unit", 4)))
    parts: list[tuple[str, str]] = []
    staff_map: dict[int, tuple[str, int]] = {}
    part_numbers: dict[str, int] = {}

    def register_part(pid: str, name: str) -> None:
        if pid not in part_numbers:
            part_numbers[pid] = len(parts) + 1
            parts.append((pid, name))

    for group in scoredef.iter():
        if _local(group.tag) != "staffGrp":
            continue
        gid = group.get(_XML_ID, "")
        if not gid.startswith("part-"):
            continue
        pid = gid[len("part-"):]
        register_part(pid, group.get("label") or pid)
        local = 0
        for sd in group:
            if _local(sd.tag) != "staffDef":
                continue
            local += 1
            staff_map[int(sd.get("n", "1"))] = (pid, local)
    for sd in scoredef.iter():
        if _local(sd.tag) == "staffDef":
            n = int(sd.get("n", "1"))
            if n not in staff_map:
                pid = f"P{n}"
                register_part(pid, pid)
                staff_map[n] = (pid, 1)

    time_signatures: list[tuple[int, int, int]] = [(0, meter[0], meter[1])]
    key_signatures: list[tuple[int, int]] = []
    if scoredef.get("keysig") is not None:
        key_signatures.append((0, _parse_keysig_attr(scoredef.get("keysig"))))

    notes: list[NoteEvent] = []
    rests: list[RestEvent] = []
    synth_counter: dict[int, int] = {}
    used_ids: set[str] = set()
    cursor = 0

    def synthetic_id(part_no: int) -> str:
        idx = synth_counter.get(part_no, 0)
        synth_counter[part_no] = idx + 1
        candidate = f"p{part_no}-{idx}"
        while candidate in used_ids:
            warnings.append(f"synthetic id {candidate!r} collides; suffixing")
            candidate += "x"
        return candidate

    def event_duration(elem: ET.Element) -> int:
        ppq_attr = elem.get("dur.ppq")
        if ppq_attr is not None:
            return int(ppq_attr)
        dur = elem.get("dur")
        if dur is None:
            raise ValidationError(f"<{_local(elem.tag)}> without @dur or @dur.ppq")
        return _duration_from_notation(dur, int(elem.get("dots", "0")), tpq)

    def event_onset(elem: ET.Element, m_start: int, layer_cursor: int) -> int:
        ts = elem.get("tstamp.ges")
        if ts is not None:
            return m_start + int(ts)
        return layer_cursor

    def parse_note(elem: ET.Element, part_no: int, pid: str, local_staff: int,
                   voice: int, onset: int, dur: int) -> NoteEvent:
        pname = elem.get("pname")
        oct_attr = elem.get("oct")
        if pname is None or oct_attr is None:
            raise ValidationError("note lacks @pname or @oct")
        accid = elem.get("accid.ges") or elem.get("accid")
        alter = _ACCID_TO_ALTER.get(accid, 0) if accid else 0
        raw_id = elem.get(_XML_ID)
        note_id = raw_id if raw_id else synthetic_id(part_no)
        used_ids.add(note_id)
        tie = elem.get("tie", "")
        return NoteEvent(
            id=note_id,
            onset_tick=onset,
            duration_tick=dur,
            pitch=Pitch(step=pname.upper(), alter=alter, octave=int(oct_attr)),
            voice=voice,
            staff=local_staff,
            part_id=pid,
            tie_prev=tie in ("m", "t"),
            tie_next=tie in ("m", "i"),
        )

    for child in section:
        name = _local(child.tag)
        if name == "scoreDef":
            if child.get("meter.count") is not None:
                meter = (int(child.get("meter.count")), int(child.get("meter.unit", 4)))
                time_signatures.append((cursor, meter[0], meter[1]))
            if child.get("keysig") is not None:
                key_signatures.append((cursor, _parse_keysig_attr(child.get("keysig"))))
            continue
        if name != "measure":
            warnings.append(f"unsupported section child <{name}> skipped")
            continue
        m_start = cursor
        measure_len = Fraction(meter[0] * 4 * tpq, meter[1])
        if measure_len.denominator != 1:
            raise ValidationError(f"meter {meter[0]}/{meter[1]} not integral at ppq {tpq}")
        for staff_elem in child:
            sname = _local(staff_elem.tag)
            if sname == "harm":
                continue  # display-only annotation
            if sname != "staff":
                warnings.append(f"unsupported measure child <{sname}> skipped")
                continue
            staff_n = int(staff_elem.get("n", "1"))
            pid, local_staff = staff_map.get(staff_n, (f"P{staff_n}", 1))
            if staff_n not in staff_map:
                register_part(pid, pid)
                staff_map[staff_n] = (pid, local_staff)
            part_no = part_numbers[pid]
            for layer in staff_elem:
                if _local(layer.tag) != "layer":
                    warnings.append(f"unsupported staff child <{_local(layer.tag)}> skipped")
                    continue
                voice = int(layer.get("n", "1"))
                layer_cursor = m_start
                for event in layer:
                    ename = _local(event.tag)
                    if ename in ("mSpace", "mRest"):
                        layer_cursor = m_start + int(measure_len)
                        continue
                    if ename == "space":
                        onset = event_onset(event, m_start, layer_cursor)
                        layer_cursor = onset + event_duration(event)
                        continue
                    if ename == "rest":
                        onset = event_onset(event, m_start, layer_cursor)
                        dur = event_duration(event)
                        rests.append(RestEvent(onset_tick=onset, duration_tick=dur,
                                               voice=voice, staff=local_staff, part_id=pid))
                        layer_cursor = onset + dur
                        continue
                    if ename == "note":
                        onset = event_onset(event, m_start, layer_cursor)
                        dur = event_duration(event)
                        notes.append(parse_note(event, part_no, pid, local_staff, voice, onset, dur))
                        layer_cursor = onset + dur
                        continue
                    if ename == "chord":
                        onset = event_onset(event, m_start, layer_cursor)
                        dur = event_duration(event)
                        for member in event:
                            if _local(member.tag) != "note":
                                warnings.append(
                                    f"unsupported chord child <{_local(member.tag)}> skipped")
                                continue
                            mdur = int(member.get("dur.ppq")) if member.get("dur.ppq") else dur
                            notes.append(parse_note(member, part_no, pid, local_staff,
                                                    voice, onset, mdur))
                        layer_cursor = onset + dur
                        continue
                    warnings.append(f"unsupported layer child <{ename}> skipped")
        cursor = m_start + int(measure_len)

    return Score.build(
        parts=parts,
        notes=notes,
        rests=rests,
        ticks_per_quarter=tpq,
        time_signatures=time_signatures,
        key_signatures=key_signatures,
        warnings=warnings,
    )
