"""Taped forward pass of the cadence network and its gradient extraction.

Per layer, each relation r contributes W_r @ concat(h_v, mean of masked
in-neighbor messages under r); the per-relation contributions are summed,
passed through the activation, then row-normalized. After the encoder, the
onset pooling adds the mean embedding of all notes sharing an onset back
onto each of those notes, and a two-layer MLP head produces one logit row
per note.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint, encoder_weight_name
from .engine import BackpropMode, Node, Tape, backward
from .errors import ValidationError
from .features import FEATURE_SPECS
from .graph import RelationType, ScoreGraph


@dataclass
class TapedForward:
    """Forward result: logits plus the tape and its leaf handles."""

    logits: np.ndarray
    tape: Tape
    feature_leaf: Node
    mask_leaves: dict[RelationType, Node]
    logits_node: Node
    pooled_node: Node
    weight_leaves: dict[str, Node]


@dataclass
class GradientResult:
    d_features: np.ndarray
    d_edge_mask: dict[RelationType, np.ndarray]
    output: float


def _edge_arrays(graph: ScoreGraph) -> dict[RelationType, tuple[np.ndarray, np.ndarray]]:
    arrays = {}
    for rel in RelationType:
        pairs = graph.edges.get(rel, ())
        if pairs:
            src = np.array([s for s, _ in pairs], dtype=np.int64)
            dst = np.array([d for _, d in pairs], dtype=np.int64)
        else:
            src = np.zeros(0, dtype=np.int64)
            dst = np.zeros(0, dtype=np.int64)
        arrays[rel] = (src, dst)
    return arrays


def onset_groups(onsets: np.ndarray) -> np.ndarray:
    """Dense group ids for equal onset ticks, in ascending onset order."""
    uniq = {t: i for i, t in enumerate(sorted(set(int(v) for v in onsets)))}
    return np.array([uniq[int(v)] for v in onsets], dtype=np.int64)


def _check_compat(graph: ScoreGraph, ckpt: Checkpoint) -> None:
    if graph.n_features != ckpt.in_dim:
        raise ValidationError(
            f"graph has {graph.n_features} features but checkpoint expects {ckpt.in_dim}")
    known = FEATURE_SPECS.get(ckpt.feature_spec)
    if known is not None and tuple(graph.feature_names) != known:
        raise ValidationError(
            f"graph feature names do not match checkpoint feature spec {ckpt.feature_spec!r}")


def forward_with_tape(
    graph: ScoreGraph,
    ckpt: Checkpoint,
    edge_mask: dict[RelationType, np.ndarray] | None = None,
    feature_override: np.ndarray | None = None,
) -> TapedForward:
    """Run the network, recording every op; edge masks default to all ones."""
    _check_compat(graph, ckpt)
    config = ckpt.model_config
    n = graph.n_nodes

    features = graph.features if feature_override is None else np.asarray(feature_override)
    if features.shape != graph.features.shape:
        raise ValidationError(
            f"feature_override shape {features.shape} != {graph.features.shape}")

    arrays = _edge_arrays(graph)
    tape = Tape()
    x = tape.leaf(features, name="features")
    mask_leaves: dict[RelationType, Node] = {}
    for rel in RelationType:
        n_edges = len(arrays[rel][0])
        if edge_mask is not None and rel in edge_mask:
            mask = np.asarray(edge_mask[rel], dtype=np.float64)
            if mask.shape != (n_edges,):
                raise ValidationError(
                    f"edge mask for {rel.key} has shape {mask.shape}, expected ({n_edges},)")
            if n_edges and (mask.min() < 0.0 or mask.max() > 1.0):
                raise ValidationError(f"edge mask for {rel.key} outside [0, 1]")
        else:
            mask = np.ones(n_edges, dtype=np.float64)
        mask_leaves[rel] = tape.leaf(mask, name=f"mask.{rel.key}")

    weight_leaves: dict[str, Node] = {
        name: tape.leaf(t, name=name) for name, t in sorted(ckpt.tensors.items())
    }

    h = x
    for layer in range(config.n_layers):
        total: Node | None = None
        for rel in RelationType:
            src, dst = arrays[rel]
            agg = tape.masked_mean(h, mask_leaves[rel], src, dst, n)
            z = tape.matmul(tape.concat_cols(h, agg),
                            weight_leaves[encoder_weight_name(layer, rel)])
            total = z if total is None else tape.add(total, z)
        if config.activation == "relu":
            total = tape.relu(total)
        if config.norm == "l2":
            total = tape.l2norm_rows(total)
        h = total

    pooled = tape.add(h, tape.group_mean(h, onset_groups(graph.onsets)))

    hidden = tape.add_bias(tape.matmul(pooled, weight_leaves["mlp.0.weight"]),
                           weight_leaves["mlp.0.bias"])
    if config.activation == "relu":
        hidden = tape.relu(hidden)
    logits = tape.add_bias(tape.matmul(hidden, weight_leaves["mlp.1.weight"]),
                           weight_leaves["mlp.1.bias"])

    return TapedForward(
        logits=logits.data.copy(),
        tape=tape,
        feature_leaf=x,
        mask_leaves=mask_leaves,
        logits_node=logits,
        pooled_node=pooled,
        weight_leaves=weight_leaves,
    )


def backward_target(fp: TapedForward, target: tuple[int, int],
                    mode: BackpropMode = BackpropMode.STANDARD) -> GradientResult:
    """Gradients of logits[node, class] w.r.t. features and edge masks."""
    node_index, class_index = target
    n, c = fp.logits.shape
    if not (0 <= node_index < n and 0 <= class_index < c):
        raise ValidationError(f"target {target} out of range for logits {fp.logits.shape}")
    seed = np.zeros_like(fp.logits)
    seed[node_index, class_index] = 1.0
    grads = backward(fp.tape, fp.logits_node, seed, mode)
    d_features = grads.get(fp.feature_leaf.idx)
    if d_features is None:
        d_features = np.zeros_like(fp.feature_leaf.data)
    d_edge_mask = {}
    for rel, leaf in fp.mask_leaves.items():
        g = grads.get(leaf.idx)
        d_edge_mask[rel] = g if g is not None else np.zeros_like(leaf.data)
    return GradientResult(
        d_features=d_features,
        d_edge_mask=d_edge_mask,
        output=float(fp.logits[node_index, class_index]),
    )
