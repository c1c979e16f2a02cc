"""Fidelity metrics and the per-piece, per-method evaluation harness.

Per explained note with original predicted class y:

  fid+  1 if removing the selected edges from the full graph flips the
        prediction at the target (necessity),
  fid-  1 if the kept-only subgraph alone already flips it (sufficiency;
        lower is better).

The kept-only subgraph contains exactly the selected edges; features of
nodes outside the explanation are zeroed while the nodes stay in place so
matrix shapes are preserved. Both variants rebuild the graph rather than
multiplying masks, so mean aggregation sees the true degrees. The
characterization score is the weighted harmonic mean of fid+ and 1 - fid-.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import Checkpoint
from .errors import ValidationError
from .explain import ExplainConfig, Explanation, explain
from .graph import RelationType, ScoreGraph
from .model import predict
from .score import CADENCE_CLASSES

METHOD_LABELS = {"saliency": "SAL", "gbp": "GBP", "deconv": "DC", "ig": "IG"}


@dataclass(frozen=True)
class MetricConfig:
    w_plus: float = 0.5
    w_minus: float = 0.5

    def __post_init__(self):
        if self.w_plus < 0 or self.w_minus < 0:
            raise ValidationError("fidelity weights must be nonnegative")
        if abs(self.w_plus + self.w_minus - 1.0) > 1e-12:
            raise ValidationError("fidelity weights must sum to 1")


@dataclass
class InstanceRecord:
    note_id: str
    original_class: str
    removed_class: str
    kept_class: str
    fid_plus: int
    fid_minus: int


@dataclass
class FidelityReport:
    records: list[InstanceRecord]
    fid_plus: float
    fid_minus: float
    characterization: float


def characterization(fid_plus: float, fid_minus: float,
                     cfg: MetricConfig | None = None) -> float:
    """Weighted harmonic mean of fid+ and (1 - fid-); 0 on degenerate inputs."""
    cfg = cfg or MetricConfig()
    if not (0.0 <= fid_plus <= 1.0 and 0.0 <= fid_minus <= 1.0):
        raise ValidationError("fidelities must lie in [0, 1]")
    if fid_plus == 0.0 or fid_minus == 1.0:
        return 0.0
    return (cfg.w_plus + cfg.w_minus) / (cfg.w_plus / fid_plus + cfg.w_minus / (1.0 - fid_minus))


def removed_subgraph(graph: ScoreGraph, expl: Explanation) -> ScoreGraph:
    """Full graph minus the selected edges; features untouched."""
    edges = {}
    for rel in RelationType:
        drop = set(expl.selected_edges.get(rel, ()))
        edges[rel] = tuple(p for p in graph.edges.get(rel, ()) if p not in drop)
    return replace(graph, edges=edges)


def kept_subgraph(graph: ScoreGraph, expl: Explanation) -> ScoreGraph:
    """Only the selected edges; features zeroed outside explanation_nodes."""
    edges = {rel: tuple(expl.selected_edges.get(rel, ())) for rel in RelationType}
    features = np.zeros_like(graph.features)
    keep = sorted(expl.explanation_nodes)
    features[keep] = graph.features[keep]
    return replace(graph, edges=edges, features=features)


def fidelity(graph: ScoreGraph, ckpt: Checkpoint,
             explanations: list[Explanation],
             cfg: MetricConfig | None = None) -> FidelityReport:
    if not explanations:
        raise ValidationError("fidelity needs at least one explanation")
    cfg = cfg or MetricConfig()
    original = predict(graph, ckpt)
    records = []
    for expl in explanations:
        idx = graph.index_of(expl.target_note_id)
        orig_class = original.classes[idx]
        removed_pred = predict(removed_subgraph(graph, expl), ckpt)
        kept_pred = predict(kept_subgraph(graph, expl), ckpt)
        removed_class = removed_pred.classes[idx]
        kept_class = kept_pred.classes[idx]
        records.append(InstanceRecord(
            note_id=expl.target_note_id,
            original_class=orig_class,
            removed_class=removed_class,
            kept_class=kept_class,
            fid_plus=int(removed_class != orig_class),
            fid_minus=int(kept_class != orig_class),
        ))
    fid_plus = float(np.mean([r.fid_plus for r in records]))
    fid_minus = float(np.mean([r.fid_minus for r in records]))
    return FidelityReport(
        records=records,
        fid_plus=fid_plus,
        fid_minus=fid_minus,
        characterization=characterization(fid_plus, fid_minus, cfg),
    )


@dataclass
class EvaluationTable:
    piece_names: list[str]
    methods: list[str]
    # piece -> method -> characterization score, or None where a piece has
    # no predicted cadence notes.
    cells: dict[str, dict[str, float | None]]
    reports: dict[str, dict[str, FidelityReport]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "pieces": self.piece_names,
            "methods": self.methods,
            "cells": {
                piece: {m: (None if v is None else float(v))
                        for m, v in row.items()}
                for piece, row in self.cells.items()
            },
        }

    def to_text(self) -> str:
        labels = [METHOD_LABELS.get(m, m.upper()) for m in self.methods]
        name_width = max([len(p) for p in self.piece_names] + [len("Pieces/Model")])
        col_width = max([len(s) for s in labels] + [6])
        lines = ["  ".join(["Pieces/Model".ljust(name_width)]
                           + [s.rjust(col_width) for s in labels])]
        for piece in self.piece_names:
            cells = []
            for method in self.methods:
                value = self.cells[piece][method]
                cells.append(("N/A" if value is None else f"{value:.4f}").rjust(col_width))
            lines.append("  ".join([piece.ljust(name_width)] + cells))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["piece", "note_id", "method", "fid_plus", "fid_minus"])
        for piece in self.piece_names:
            for method in self.methods:
                report = self.reports.get(piece, {}).get(method)
                if report is None:
                    continue
                for record in report.records:
                    writer.writerow([piece, record.note_id, method,
                                     record.fid_plus, record.fid_minus])
        return buf.getvalue()


def evaluate(pieces: list[tuple[str, ScoreGraph]], ckpt: Checkpoint,
             methods: tuple[str, ...] = ("saliency", "gbp", "deconv", "ig"),
             cfg: MetricConfig | None = None,
             top_k: int = 10, ig_steps: int = 50) -> EvaluationTable:
    """One row per piece, one column per method. Instances are the notes the
    model itself predicts as a cadence class."""
    if not pieces:
        raise ValidationError("evaluate needs at least one piece")
    cfg = cfg or MetricConfig()
    table = EvaluationTable(piece_names=[name for name, _ in pieces],
                            methods=list(methods), cells={}, reports={})
    for name, graph in pieces:
        prediction = predict(graph, ckpt)
        instance_ids = [nid for nid, cls in zip(prediction.note_ids, prediction.classes)
                        if cls != CADENCE_CLASSES[0]]
        table.cells[name] = {}
        table.reports[name] = {}
        for method in methods:
            if not instance_ids:
                table.cells[name][method] = None
                continue
            expl_cfg = ExplainConfig(method=method, top_k=top_k, ig_steps=ig_steps)
            explanations = [explain(graph, ckpt, nid, expl_cfg) for nid in instance_ids]
            report = fidelity(graph, ckpt, explanations, cfg)
            table.cells[name][method] = report.characterization
            table.reports[name][method] = report
    return table


def table_json_bytes(table: EvaluationTable) -> bytes:
    return (json.dumps(table.to_json(), sort_keys=True, indent=1) + "\n").encode("utf-8")
