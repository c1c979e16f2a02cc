"""Reverse-mode tape over dense float64 arrays.

The operator set is exactly what the score network needs: matrix products,
additions, ReLU, row-wise L2 normalization, column concatenation, masked
mean aggregation over typed edge lists, onset-group mean pooling, and a
fused softmax cross-entropy head for training. Backward supports three
ReLU rules:

  standard   g * 1[x > 0]          (exact gradient)
  deconv     g * 1[g > 0]          (forward mask ignored)
  guided     g * 1[g > 0] * 1[x > 0]

All other operators always use their exact adjoints.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ValidationError


class BackpropMode(enum.Enum):
    STANDARD = "standard"
    DECONV = "deconv"
    GUIDED = "guided"


@dataclass
class Node:
    """One taped value: the op that produced it, its inputs, and saved data."""

    op: str
    inputs: tuple["Node", ...]
    data: np.ndarray
    ctx: dict = field(default_factory=dict)
    idx: int = -1


class Tape:
    """Records a forward computation for later reverse sweeps.

    A tape is append-only and topologically ordered by construction. It is
    safe to run several backward sweeps over one tape sequentially, but a
    tape must not be shared across threads.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def _record(self, op: str, inputs: tuple[Node, ...], data: np.ndarray, **ctx) -> Node:
        if not np.all(np.isfinite(data)):
            raise NumericError(f"non-finite values produced by op {op!r} at step {len(self.nodes)}")
        node = Node(op=op, inputs=inputs, data=data, ctx=ctx, idx=len(self.nodes))
        self.nodes.append(node)
        return node

    def leaf(self, data: np.ndarray, name: str = "") -> Node:
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"leaf {name!r} contains non-finite values")
        return self._record("leaf", (), arr, name=name)

    def matmul(self, a: Node, b: Node) -> Node:
        if a.data.shape[-1] != b.data.shape[0]:
            raise ValidationError(
                f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
        return self._record("matmul", (a, b), a.data @ b.data)

    def add(self, a: Node, b: Node) -> Node:
        if a.data.shape != b.data.shape:
            raise ValidationError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
        return self._record("add", (a, b), a.data + b.data)

    def add_bias(self, a: Node, bias: Node) -> Node:
        if a.data.shape[-1] != bias.data.shape[-1] or bias.data.ndim != 1:
            raise ValidationError(
                f"bias shape mismatch: {a.data.shape} + {bias.data.shape}")
        return self._record("add_bias", (a, bias), a.data + bias.data)

    def relu(self, a: Node) -> Node:
        return self._record("relu", (a,), np.maximum(a.data, 0.0))

    def l2norm_rows(self, a: Node, eps: float = 1e-12) -> Node:
        norms = np.sqrt(np.sum(a.data * a.data, axis=1, keepdims=True))
        denom = np.maximum(norms, eps)
        return self._record("l2norm_rows", (a,), a.data / denom, norms=norms, eps=eps)

    def concat_cols(self, a: Node, b: Node) -> Node:
        if a.data.shape[0] != b.data.shape[0]:
            raise ValidationError(
                f"concat row mismatch: {a.data.shape} vs {b.data.shape}")
        return self._record("concat_cols", (a, b), np.concatenate([a.data, b.data], axis=1),
                            split=a.data.shape[1])

    def masked_mean(self, h: Node, mask: Node, src: np.ndarray, dst: np.ndarray,
                    n_out: int) -> Node:
        """out[v] = sum_{e=(u,v)} mask[e] * h[u] / indegree(v).

        The denominator is the plain in-degree of v under this relation,
        independent of the mask, so the gradient in each mask entry stays
        well-defined; rows with no in-edges are zero.
        """
        if mask.data.shape != (len(src),):
            raise ValidationError(
                f"mask length {mask.data.shape} does not match edge count {len(src)}")
        out = np.zeros((n_out, h.data.shape[1]), dtype=np.float64)
        indeg = np.zeros(n_out, dtype=np.float64)
        if len(src):
            np.add.at(out, dst, mask.data[:, None] * h.data[src])
            np.add.at(indeg, dst, 1.0)
        scale = np.where(indeg > 0, indeg, 1.0)
        out /= scale[:, None]
        return self._record("masked_mean", (h, mask), out, src=src, dst=dst, scale=scale)

    def group_mean(self, h: Node, groups: np.ndarray) -> Node:
        """out[v] = mean over rows u with groups[u] == groups[v]."""
        n_groups = int(groups.max()) + 1 if len(groups) else 0
        sums = np.zeros((n_groups, h.data.shape[1]), dtype=np.float64)
        counts = np.zeros(n_groups, dtype=np.float64)
        np.add.at(sums, groups, h.data)
        np.add.at(counts, groups, 1.0)
        means = sums / counts[:, None]
        return self._record("group_mean", (h,), means[groups], groups=groups, counts=counts)

    def cross_entropy_mean(self, logits: Node, labels: np.ndarray) -> Node:
        """Mean softmax cross-entropy against integer class labels."""
        z = logits.data
        zmax = z.max(axis=1, keepdims=True)
        ez = np.exp(z - zmax)
        probs = ez / ez.sum(axis=1, keepdims=True)
        rows = np.arange(z.shape[0])
        losses = -np.log(np.maximum(probs[rows, labels], 1e-300))
        return self._record("cross_entropy_mean", (logits,),
                            np.array(losses.mean()), probs=probs, labels=labels)


def backward(tape: Tape, output: Node, seed: np.ndarray,
             mode: BackpropMode = BackpropMode.STANDARD) -> dict[int, np.ndarray]:
    """Reverse sweep from `output` seeded with `seed`; returns grads by node idx."""
    seed = np.asarray(seed, dtype=np.float64)
    if seed.shape != output.data.shape:
        raise ValidationError(f"seed shape {seed.shape} does not match output {output.data.shape}")
    grads: dict[int, np.ndarray] = {output.idx: seed.copy()}

    for node in reversed(tape.nodes[: output.idx + 1]):
        g = grads.get(node.idx)
        if g is None:
            continue
        op = node.op
        if op == "leaf":
            continue
        elif op == "matmul":
            a, b = node.inputs
            _accumulate(grads, a, g @ b.data.T)
            _accumulate(grads, b, a.data.T @ g)
        elif op == "add":
            a, b = node.inputs
            _accumulate(grads, a, g)
            _accumulate(grads, b, g)
        elif op == "add_bias":
            a, bias = node.inputs
            _accumulate(grads, a, g)
            _accumulate(grads, bias, g.sum(axis=0))
        elif op == "relu":
            (a,) = node.inputs
            if mode is BackpropMode.STANDARD:
                ga = g * (a.data > 0)
            elif mode is BackpropMode.DECONV:
                ga = g * (g > 0)
            else:
                ga = g * (g > 0) * (a.data > 0)
            _accumulate(grads, a, ga)
        elif op == "l2norm_rows":
            (a,) = node.inputs
            norms = node.ctx["norms"]
            eps = node.ctx["eps"]
            denom = np.maximum(norms, eps)
            ga = g / denom
            active = (norms > eps).astype(np.float64)
            dot = np.sum(g * a.data, axis=1, keepdims=True)
            ga -= active * a.data * dot / denom**3
            _accumulate(grads, a, ga)
        elif op == "concat_cols":
            a, b = node.inputs
            split = node.ctx["split"]
            _accumulate(grads, a, g[:, :split])
            _accumulate(grads, b, g[:, split:])
        elif op == "masked_mean":
            h, mask = node.inputs
            src, dst, scale = node.ctx["src"], node.ctx["dst"], node.ctx["scale"]
            gh = np.zeros_like(h.data)
            gm = np.zeros_like(mask.data)
            if len(src):
                scaled = g / scale[:, None]
                np.add.at(gh, src, mask.data[:, None] * scaled[dst])
                gm = np.einsum("ej,ej->e", h.data[src], scaled[dst])
            _accumulate(grads, h, gh)
            _accumulate(grads, mask, gm)
        elif op == "group_mean":
            (h,) = node.inputs
            groups, counts = node.ctx["groups"], node.ctx["counts"]
            sums = np.zeros((len(counts), g.shape[1]), dtype=np.float64)
            np.add.at(sums, groups, g)
            _accumulate(grads, h, (sums / counts[:, None])[groups])
        elif op == "cross_entropy_mean":
            (logits,) = node.inputs
            probs, labels = node.ctx["probs"], node.ctx["labels"]
            onehot = np.zeros_like(probs)
            onehot[np.arange(len(labels)), labels] = 1.0
            _accumulate(grads, logits, float(g) * (probs - onehot) / probs.shape[0])
        else:
            raise NumericError(f"no adjoint for op {op!r}")
    return grads


def _accumulate(grads: dict[int, np.ndarray], node: Node, value: np.ndarray) -> None:
    existing = grads.get(node.idx)
    if existing is None:
        grads[node.idx] = value.astype(np.float64, copy=True)
    else:
        existing += value


def finite_diff(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    if eps <= 0:
        raise ValidationError("finite_diff eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = eps
        hi = f(x + step)
        lo = f(x - step)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"non-finite function value at coordinate {i}")
        grad.flat[i] = (hi - lo) / (2.0 * eps)
    return grad
