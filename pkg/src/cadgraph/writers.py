"""MusicXML serialization.

Kept deliberately separate from the importer: the writer walks the score
model and emits elements directly, so writer output run back through
parse_musicxml is a meaningful consistency check rather than a mirror of
the parsing code.
"""

from __future__ import annotations

from .errors import ValidationError
from .score import NoteEvent, Score, measure_spans

_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;"}


def _esc(text: str) -> str:
    for raw, cooked in _ESCAPES.items():
        text = text.replace(raw, cooked)
    return text


def write_musicxml(score: Score) -> bytes:
    """Serialize to uncompressed score-partwise MusicXML (divisions = tpq)."""
    tpq = score.ticks_per_quarter
    spans = measure_spans(score)
    for span in spans:
        if span.start.denominator != 1 or span.end.denominator != 1:
            raise ValidationError("meter produces non-integral measure boundaries")

    ts_at = {t: (n, d) for t, n, d in score.time_signatures}
    key_at = dict(score.key_signatures)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<score-partwise version="3.1">',
        " <part-list>",
    ]
    for pid, name in score.parts:
        lines.append(f'  <score-part id="{_esc(pid)}">')
        lines.append(f"   <part-name>{_esc(name)}</part-name>")
        lines.append("  </score-part>")
    lines.append(" </part-list>")

    for pid, _name in score.parts:
        part_notes = [n for n in score.notes if n.part_id == pid]
        part_rests = [r for r in score.rests if r.part_id == pid]
        lines.append(f' <part id="{_esc(pid)}">')
        for measure_no, span in enumerate(spans, start=1):
            m_start, m_end = int(span.start), int(span.end)
            lines.append(f'  <measure number="{measure_no}">')
            attrs: list[str] = []
            if measure_no == 1:
                attrs.append(f"    <divisions>{tpq}</divisions>")
            if m_start in key_at:
                attrs.append(f"    <key><fifths>{key_at[m_start]}</fifths></key>")
            if m_start in ts_at:
                num, den = ts_at[m_start]
                attrs.append(f"    <time><beats>{num}</beats><beat-type>{den}</beat-type></time>")
            if attrs:
                lines.append("   <attributes>")
                lines.extend(attrs)
                lines.append("   </attributes>")

            voices = sorted({e.voice for e in part_notes + part_rests
                             if span.contains(e.onset_tick)}) or [1]
            cursor = m_start
            for vi, voice in enumerate(voices):
                if vi > 0 and cursor != m_start:
                    lines.append(f"   <backup><duration>{cursor - m_start}</duration></backup>")
                    cursor = m_start
                cursor = _write_voice(
                    lines,
                    [n for n in part_notes if n.voice == voice and span.contains(n.onset_tick)],
                    [r for r in part_rests if r.voice == voice and span.contains(r.onset_tick)],
                    cursor,
                )
            if cursor < m_end:
                lines.append(f"   <forward><duration>{m_end - cursor}</duration></forward>")
            elif cursor > m_end:
                lines.append(f"   <backup><duration>{cursor - m_end}</duration></backup>")
            lines.append("  </measure>")
        lines.append(" </part>")
    lines.append("</score-partwise>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _write_voice(lines: list[str], notes: list[NoteEvent], rests, cursor: int) -> int:
    chords: dict[tuple[int, int], list[NoteEvent]] = {}
    for n in sorted(notes, key=lambda n: (n.onset_tick, n.duration_tick, n.midi, n.id)):
        chords.setdefault((n.onset_tick, n.duration_tick), []).append(n)
    events: list[tuple[int, int, str, object]] = [
        (onset, dur, "notes", members) for (onset, dur), members in sorted(chords.items())
    ]
    for r in rests:
        events.append((r.onset_tick, r.duration_tick, "rest", r))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    for onset, dur, kind, payload in events:
        if onset > cursor:
            lines.append(f"   <forward><duration>{onset - cursor}</duration></forward>")
        elif onset < cursor:
            lines.append(f"   <backup><duration>{cursor - onset}</duration></backup>")
        cursor = onset
        if kind == "rest":
            rest = payload
            lines.append("   <note>")
            lines.append("    <rest/>")
            lines.append(f"    <duration>{dur}</duration>")
            lines.append(f"    <voice>{rest.voice}</voice>")
            lines.append(f"    <staff>{rest.staff}</staff>")
            lines.append("   </note>")
        else:
            for i, note in enumerate(payload):
                lines.append("   <note>")
                if i > 0:
                    lines.append("    <chord/>")
                lines.append("    <pitch>")
                lines.append(f"     <step>{note.pitch.step}</step>")
                if note.pitch.alter:
                    lines.append(f"     <alter>{note.pitch.alter}</alter>")
                lines.append(f"     <octave>{note.pitch.octave}</octave>")
                lines.append("    </pitch>")
                lines.append(f"    <duration>{note.duration_tick}</duration>")
                if note.tie_prev:
                    lines.append('    <tie type="stop"/>')
                if note.tie_next:
                    lines.append('    <tie type="start"/>')
                lines.append(f"    <voice>{note.voice}</voice>")
                lines.append(f"    <staff>{note.staff}</staff>")
                lines.append("   </note>")
        cursor = onset + dur
    return cursor
