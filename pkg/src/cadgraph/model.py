"""Cadence classifier: inference, onset pooling, embedded SMOTE, training.

Class indices are fixed: 0 no-cad, 1 PAC, 2 IAC, 3 HC. Argmax ties break
toward the lower index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint, random_checkpoint
from .engine import BackpropMode, backward
from .errors import NumericError, ValidationError
from .graph import ScoreGraph
from .network import forward_with_tape, onset_groups
from .score import CADENCE_CLASSES, CadenceAnnotations


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 7
    epochs: int = 50
    learning_rate: float = 0.5
    k_nn: int = 5
    val_fraction: float = 0.2


@dataclass
class CadencePrediction:
    note_ids: tuple[str, ...]
    classes: tuple[str, ...]
    probs: np.ndarray

    def class_of(self, note_id: str) -> str:
        return self.classes[self.note_ids.index(note_id)]

    def to_json(self) -> dict:
        return {
            "predictions": {
                nid: {"class": cls, "probs": [float(p) for p in row]}
                for nid, cls, row in zip(self.note_ids, self.classes, self.probs)
            }
        }


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def onset_pool(embeddings: np.ndarray, onsets: np.ndarray) -> np.ndarray:
    """Residual onset pooling: each row gains the mean of its onset group."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.shape[0] != len(onsets):
        raise ValidationError("embeddings and onsets must have matching length")
    groups = onset_groups(np.asarray(onsets))
    n_groups = int(groups.max()) + 1 if len(groups) else 0
    sums = np.zeros((n_groups, embeddings.shape[1]))
    counts = np.zeros(n_groups)
    np.add.at(sums, groups, embeddings)
    np.add.at(counts, groups, 1.0)
    return embeddings + (sums / counts[:, None])[groups]


def predict(graph: ScoreGraph, ckpt: Checkpoint) -> CadencePrediction:
    fp = forward_with_tape(graph, ckpt)
    probs = softmax(fp.logits)
    classes = tuple(CADENCE_CLASSES[int(i)] for i in probs.argmax(axis=1))
    return CadencePrediction(note_ids=graph.node_ids, classes=classes, probs=probs)


@dataclass
class SmoteResult:
    embeddings: np.ndarray
    labels: np.ndarray
    # (parent_row, neighbor_row, lambda) per synthetic point, for auditing.
    provenance: list[tuple[int, int, float]] = field(default_factory=list)


def smote_oversample(embeddings: np.ndarray, labels: np.ndarray, k_nn: int = 5,
                     seed: int = 0, rng: np.random.Generator | None = None) -> SmoteResult:
    """Upsample every minority class to the majority count.

    Each synthetic point is x + lam * (x_nn - x) with lam ~ U[0, 1] and x_nn
    one of x's k nearest same-class neighbors (Euclidean). Original rows are
    preserved and come first.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if embeddings.shape[0] != len(labels):
        raise ValidationError("embeddings and labels must have matching length")
    if rng is None:
        rng = np.random.default_rng(seed)

    counts = np.bincount(labels, minlength=1)
    present = [c for c in range(len(counts)) if counts[c] > 0]
    majority = int(counts.max()) if len(labels) else 0
    for c in present:
        if counts[c] == 1 and counts[c] < majority:
            raise ValidationError(
                f"class {c} has a single sample; lower k_nn or merge batches")

    new_rows = [embeddings]
    new_labels = [labels]
    provenance: list[tuple[int, int, float]] = []
    for c in present:
        deficit = majority - int(counts[c])
        if deficit == 0:
            continue
        members = np.flatnonzero(labels == c)
        pts = embeddings[members]
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        k = min(k_nn, len(members) - 1)
        neighbor_lists = np.argsort(d2, axis=1)[:, :k]
        synth = np.empty((deficit, embeddings.shape[1]))
        for s in range(deficit):
            pick = int(rng.integers(0, len(members)))
            nn_local = int(neighbor_lists[pick][int(rng.integers(0, k))])
            lam = float(rng.uniform(0.0, 1.0))
            x = pts[pick]
            x_nn = pts[nn_local]
            synth[s] = x + lam * (x_nn - x)
            provenance.append((int(members[pick]), int(members[nn_local]), lam))
        new_rows.append(synth)
        new_labels.append(np.full(deficit, c, dtype=np.int64))

    return SmoteResult(
        embeddings=np.concatenate(new_rows, axis=0),
        labels=np.concatenate(new_labels),
        provenance=provenance,
    )


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int = 4) -> float:
    scores = []
    for c in range(n_classes):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def labels_for_graph(graph: ScoreGraph, annotations: CadenceAnnotations) -> np.ndarray:
    return np.array([annotations.class_index_of(nid) for nid in graph.node_ids], dtype=np.int64)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict]

    def history_jsonl(self) -> str:
        return "\n".join(json.dumps(entry, sort_keys=True) for entry in self.history) + "\n"


def train(corpus: list[tuple[ScoreGraph, CadenceAnnotations]], cfg: TrainConfig,
          model_cfg=None) -> TrainResult:
    """Mini-batch gradient descent (one piece per step), cross-entropy loss.

    Pipeline per step: encoder, onset pooling, embedded SMOTE on the pooled
    embeddings, MLP head. The SMOTE interpolation is a constant row-mixing
    matrix for the step, so gradients flow back into the encoder through
    the synthetic rows. All randomness comes from cfg.seed.
    """
    from .checkpoint import ModelConfig

    if not corpus:
        raise ValidationError("training corpus is empty")
    model_cfg = model_cfg or ModelConfig()
    rng = np.random.default_rng(cfg.seed)
    in_dim = corpus[0][0].n_features
    feature_spec = "base-v1" if corpus[0][0].n_features == 40 else "custom"
    ckpt = random_checkpoint(model_cfg, in_dim, rng, feature_spec=feature_spec)

    order = rng.permutation(len(corpus))
    n_val = max(1, int(round(len(corpus) * cfg.val_fraction))) if len(corpus) > 1 else 0
    val_idx = [int(i) for i in order[:n_val]]
    train_idx = [int(i) for i in order[n_val:]] or val_idx

    labelled = [(graph, labels_for_graph(graph, ann)) for graph, ann in corpus]
    history: list[dict] = []

    for epoch in range(cfg.epochs):
        epoch_order = rng.permutation(len(train_idx))
        losses = []
        for step in epoch_order:
            graph, labels = labelled[train_idx[int(step)]]
            loss = _train_step(graph, labels, ckpt, cfg, rng)
            if not np.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch}")
            losses.append(loss)
        val_f1 = _validation_f1(labelled, val_idx, ckpt)
        history.append({
            "epoch": epoch,
            "loss": float(np.mean(losses)) if losses else 0.0,
            "val_macro_f1": val_f1,
        })
    return TrainResult(checkpoint=ckpt, history=history)


def _train_step(graph: ScoreGraph, labels: np.ndarray, ckpt: Checkpoint,
                cfg: TrainConfig, rng: np.random.Generator) -> float:
    fp = forward_with_tape(graph, ckpt)
    tape = fp.tape
    pooled = fp.pooled_node

    plan = smote_oversample(pooled.data, labels, k_nn=cfg.k_nn, rng=rng)
    n = pooled.data.shape[0]
    m = plan.embeddings.shape[0]
    mix = np.zeros((m, n))
    mix[:n, :n] = np.eye(n)
    for row, (parent, neighbor, lam) in enumerate(plan.provenance, start=n):
        mix[row, parent] = 1.0 - lam
        mix[row, neighbor] = lam

    sampled = tape.matmul(tape.leaf(mix, name="smote"), pooled)
    hidden = tape.add_bias(tape.matmul(sampled, fp.weight_leaves["mlp.0.weight"]),
                           fp.weight_leaves["mlp.0.bias"])
    if ckpt.model_config.activation == "relu":
        hidden = tape.relu(hidden)
    logits = tape.add_bias(tape.matmul(hidden, fp.weight_leaves["mlp.1.weight"]),
                           fp.weight_leaves["mlp.1.bias"])
    loss = tape.cross_entropy_mean(logits, plan.labels)

    grads = backward(tape, loss, np.array(1.0), BackpropMode.STANDARD)
    if cfg.learning_rate != 0.0:
        for name, leaf in fp.weight_leaves.items():
            g = grads.get(leaf.idx)
            if g is not None:
                ckpt.tensors[name] = ckpt.tensors[name] - cfg.learning_rate * g
    return float(loss.data)


def _validation_f1(labelled, val_idx, ckpt: Checkpoint) -> float:
    if not val_idx:
        return 0.0
    trues, preds = [], []
    for i in val_idx:
        graph, labels = labelled[i]
        fp = forward_with_tape(graph, ckpt)
        preds.append(fp.logits.argmax(axis=1))
        trues.append(labels)
    return macro_f1(np.concatenate(trues), np.concatenate(preds))
