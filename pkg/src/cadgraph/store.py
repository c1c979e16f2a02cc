"""On-disk score store with in-memory caches.

Scores are stored under their content hash, so re-uploading identical
bytes is idempotent. Parsed scores, graphs, predictions, and explanations
are cached lazily and all keyed by the same id; a single writer lock
guards mutation while reads of immutable snapshots stay lock-free.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScoreParseError, UnsupportedFormatError, ValidationError
from .graph import FeatureSpec, ScoreGraph, build_graph
from .mei import export_mei, parse_mei
from .musicxml import parse_musicxml
from .score import Score


def score_id_for(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def parse_score_bytes(data: bytes) -> Score:
    """Parse MusicXML or MEI, sniffing the root element."""
    head = data[:4000]
    if b"<mei" in head:
        return parse_mei(data)
    return parse_musicxml(data)


@dataclass
class ScoreRecord:
    score_id: str
    data: bytes
    score: Score
    graph: ScoreGraph | None = None
    mei: bytes | None = None
    predictions: object = None
    explanation_cache: dict = field(default_factory=dict)


class ScoreStore:
    def __init__(self, data_dir: Path | str):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._records: dict[str, ScoreRecord] = {}
        self._lock = threading.Lock()
        self._load_existing()

    def _load_existing(self) -> None:
        for path in sorted(self.data_dir.glob("*.score")):
            data = path.read_bytes()
            try:
                score = parse_score_bytes(data)
            except (ScoreParseError, UnsupportedFormatError, ValidationError):
                continue
            sid = path.stem
            self._records[sid] = ScoreRecord(score_id=sid, data=data, score=score)

    def ingest(self, data: bytes) -> str:
        sid = score_id_for(data)
        with self._lock:
            if sid in self._records:
                return sid
            score = parse_score_bytes(data)
            (self.data_dir / f"{sid}.score").write_bytes(data)
            self._records[sid] = ScoreRecord(score_id=sid, data=data, score=score)
        return sid

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._records)

    def get(self, score_id: str) -> ScoreRecord:
        with self._lock:
            record = self._records.get(score_id)
        if record is None:
            raise KeyError(score_id)
        return record

    def graph_for(self, score_id: str) -> ScoreGraph:
        record = self.get(score_id)
        with self._lock:
            if record.graph is None:
                record.graph = build_graph(record.score, FeatureSpec("base-v1"))
            return record.graph

    def mei_for(self, score_id: str) -> bytes:
        record = self.get(score_id)
        with self._lock:
            if record.mei is None:
                record.mei = export_mei(record.score)
            return record.mei
