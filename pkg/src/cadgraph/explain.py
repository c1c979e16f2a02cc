"""Gradient-based explanations: edge importances, hard top-k, feature masks.

Four methods share one pipeline. Saliency takes the exact gradient of the
target logit; deconvolution and guided backpropagation swap the ReLU
backward rule; integrated gradients accumulates gradients along the
straight path from an all-zero input (features and edge masks both zero)
to the actual input. Importances are absolute values, selection keeps the
k strongest edges per relation under a deterministic tie-break, and the
feature mask is the absolute attribution matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .engine import BackpropMode
from .errors import ValidationError
from .graph import RelationType, ScoreGraph
from .model import softmax
from .network import backward_target, forward_with_tape
from .score import CADENCE_CLASSES

METHODS = ("saliency", "ig", "deconv", "gbp")
_MODE_BY_METHOD = {
    "saliency": BackpropMode.STANDARD,
    "deconv": BackpropMode.DECONV,
    "gbp": BackpropMode.GUIDED,
}


@dataclass(frozen=True)
class ExplainConfig:
    method: str = "ig"
    top_k: int = 10
    ig_steps: int = 50
    target_class: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown explanation method {self.method!r}")
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")
        if self.ig_steps < 1:
            raise ValidationError("ig_steps must be >= 1")


@dataclass
class Explanation:
    target_note_id: str
    method: str
    target_class: int
    model_output: np.ndarray
    edge_importance: dict[RelationType, np.ndarray]
    selected_edges: dict[RelationType, tuple[tuple[int, int], ...]]
    feature_mask: np.ndarray
    explanation_nodes: frozenset[int] = field(default_factory=frozenset)
    # (src, dst) -> position in the relation's edge list, for score lookups.
    edge_index: dict[RelationType, dict[tuple[int, int], int]] = field(
        default_factory=dict, repr=False)

    def to_json(self, graph: ScoreGraph, feature_top_k: int | None = None) -> dict:
        ranked, totals = feature_importance(self, graph, feature_top_k or 10)
        edge_payload = {}
        for rel in RelationType:
            scores = _selected_scores(self, rel)
            edge_payload[rel.key] = [
                {"src_id": graph.node_ids[s], "dst_id": graph.node_ids[d],
                 "score": float(score)}
                for (s, d), score in scores
            ]
        return {
            "target_note_id": self.target_note_id,
            "method": self.method,
            "target_class": CADENCE_CLASSES[self.target_class],
            "probs": [float(p) for p in self.model_output],
            "edges": edge_payload,
            "features": {
                "target": [{"name": name, "score": float(s)} for name, s in ranked],
                "node_totals": {
                    graph.node_ids[i]: float(t) for i, t in enumerate(totals)
                },
            },
        }


def _selected_scores(expl: Explanation, rel: RelationType):
    pairs = expl.selected_edges.get(rel, ())
    index = expl.edge_index.get(rel, {})
    return [(pair, expl.edge_importance[rel][index[pair]]) for pair in pairs]


def topk_select(importance: dict[RelationType, np.ndarray],
                edges: dict[RelationType, tuple[tuple[int, int], ...]],
                k: int) -> dict[RelationType, tuple[tuple[int, int], ...]]:
    """Per relation, the k highest-importance edges; ties break on
    (importance desc, src asc, dst asc)."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    selected = {}
    for rel, pairs in edges.items():
        scores = importance.get(rel)
        if scores is None or not len(pairs):
            selected[rel] = ()
            continue
        order = sorted(range(len(pairs)),
                       key=lambda i: (-scores[i], pairs[i][0], pairs[i][1]))
        selected[rel] = tuple(pairs[i] for i in order[:k])
    return selected


def integrated_gradients(graph: ScoreGraph, ckpt: Checkpoint, target: tuple[int, int],
                         steps: int = 50) -> tuple[np.ndarray, dict[RelationType, np.ndarray]]:
    """Signed midpoint-rule attributions for features and edge masks jointly.

    The path runs from all-zero features and all-zero masks to the input;
    with a zero baseline each attribution is input times the path-averaged
    gradient. Sum of all attributions approximates F(input) - F(zero).
    """
    feat_grad = np.zeros_like(graph.features)
    mask_grad = {rel: np.zeros(len(graph.edges.get(rel, ()))) for rel in RelationType}
    for i in range(steps):
        alpha = (i + 0.5) / steps
        fp = forward_with_tape(
            graph, ckpt,
            edge_mask={rel: np.full(len(graph.edges.get(rel, ())), alpha)
                       for rel in RelationType},
            feature_override=alpha * graph.features,
        )
        grad = backward_target(fp, target, BackpropMode.STANDARD)
        feat_grad += grad.d_features
        for rel in RelationType:
            mask_grad[rel] += grad.d_edge_mask[rel]
    feat_attr = graph.features * feat_grad / steps
    mask_attr = {rel: mask_grad[rel] / steps for rel in RelationType}
    return feat_attr, mask_attr


def explain(graph: ScoreGraph, ckpt: Checkpoint, target_note_id: str,
            cfg: ExplainConfig | None = None) -> Explanation:
    cfg = cfg or ExplainConfig()
    node_index = graph.index_of(target_note_id)

    fp = forward_with_tape(graph, ckpt)
    probs = softmax(fp.logits)
    target_class = cfg.target_class
    if target_class is None:
        target_class = int(probs[node_index].argmax())
    if not 0 <= target_class < fp.logits.shape[1]:
        raise ValidationError(f"target class {target_class} out of range")

    if cfg.method == "ig":
        feat_attr, mask_attr = integrated_gradients(
            graph, ckpt, (node_index, target_class), cfg.ig_steps)
        feature_mask = np.abs(feat_attr)
        edge_importance = {rel: np.abs(mask_attr[rel]) for rel in RelationType}
    else:
        grad = backward_target(fp, (node_index, target_class), _MODE_BY_METHOD[cfg.method])
        feature_mask = np.abs(grad.d_features)
        edge_importance = {rel: np.abs(grad.d_edge_mask[rel]) for rel in RelationType}

    selected = topk_select(edge_importance, graph.edges, cfg.top_k)
    nodes = {node_index}
    for pairs in selected.values():
        for s, d in pairs:
            nodes.add(s)
            nodes.add(d)

    return Explanation(
        target_note_id=target_note_id,
        method=cfg.method,
        target_class=target_class,
        model_output=probs[node_index].copy(),
        edge_importance=edge_importance,
        selected_edges=selected,
        feature_mask=feature_mask,
        explanation_nodes=frozenset(nodes),
        edge_index={
            rel: {pair: i for i, pair in enumerate(graph.edges.get(rel, ()))}
            for rel in RelationType
        },
    )


def feature_importance(expl: Explanation, graph: ScoreGraph,
                       k: int = 10) -> tuple[list[tuple[str, float]], np.ndarray]:
    """Top-k features of the target note plus per-node mask totals."""
    node_index = graph.index_of(expl.target_note_id)
    row = expl.feature_mask[node_index]
    order = sorted(range(len(row)), key=lambda j: (-row[j], j))
    ranked = [(graph.feature_names[j], float(row[j])) for j in order[:k]]
    totals = expl.feature_mask.sum(axis=1)
    return ranked, totals
