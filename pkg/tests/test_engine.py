"""Tape engine: gradient exactness, ReLU backward modes, masking semantics."""

from dataclasses import replace

import numpy as np
import pytest

from cadgraph.checkpoint import ModelConfig, zero_checkpoint
from cadgraph.engine import BackpropMode, Tape, backward, finite_diff
from cadgraph.errors import NumericError, ValidationError
from cadgraph.graph import RelationType
from cadgraph.model import softmax
from cadgraph.network import backward_target, forward_with_tape

from util import random_graph, relative_error, small_checkpoint


class TestFiniteDiff:
    def test_quadratic_exact(self):
        g = finite_diff(lambda x: float(x[0] ** 2), np.array([3.0]), eps=1e-4)
        assert abs(g[0] - 6.0) <= 1e-8

    def test_constant_zero(self):
        g = finite_diff(lambda x: 1.5, np.zeros(4), eps=1e-5)
        assert np.all(g == 0.0)

    def test_nonpositive_eps_rejected(self):
        with pytest.raises(ValidationError):
            finite_diff(lambda x: 0.0, np.zeros(1), eps=0.0)

    def test_nonfinite_function_rejected(self):
        with pytest.raises(NumericError):
            finite_diff(lambda x: float("nan"), np.zeros(1))


class TestTapeOps:
    def test_taped_forward_matches_straight_line(self):
        # Independent straight-line recomputation of the same network.
        rng = np.random.default_rng(0)
        for seed in range(8):
            rng = np.random.default_rng(seed)
            graph = random_graph(rng, n_nodes=int(rng.integers(1, 9)))
            ckpt = small_checkpoint(rng, graph.n_features)
            fp = forward_with_tape(graph, ckpt)

            h = graph.features.copy()
            n = graph.n_nodes
            for layer in range(ckpt.model_config.n_layers):
                total = np.zeros((n, ckpt.model_config.hidden_dim))
                for rel in RelationType:
                    agg = np.zeros((n, h.shape[1]))
                    indeg = np.zeros(n)
                    for s, d in graph.edges[rel]:
                        agg[d] += h[s]
                        indeg[d] += 1
                    agg /= np.where(indeg > 0, indeg, 1.0)[:, None]
                    w = ckpt.tensors[f"encoder.{layer}.{rel.key}.weight"]
                    total += np.concatenate([h, agg], axis=1) @ w
                total = np.maximum(total, 0.0)
                norms = np.sqrt((total * total).sum(axis=1, keepdims=True))
                h = total / np.maximum(norms, 1e-12)
            groups = {}
            for i, t in enumerate(graph.onsets):
                groups.setdefault(int(t), []).append(i)
            pooled = h.copy()
            for members in groups.values():
                pooled[members] += h[members].mean(axis=0)
            hidden = np.maximum(pooled @ ckpt.tensors["mlp.0.weight"]
                                + ckpt.tensors["mlp.0.bias"], 0.0)
            logits = hidden @ ckpt.tensors["mlp.1.weight"] + ckpt.tensors["mlp.1.bias"]
            assert np.abs(fp.logits - logits).max() <= 1e-12

    def test_zero_network_uniform_probabilities(self):
        rng = np.random.default_rng(3)
        graph = random_graph(rng, n_nodes=1, n_features=5)
        graph = replace(graph, edges={r: () for r in RelationType})
        ckpt = zero_checkpoint(ModelConfig(hidden_dim=8), 5, feature_spec="custom")
        fp = forward_with_tape(graph, ckpt)
        assert np.all(fp.logits == 0.0)
        assert np.allclose(softmax(fp.logits), 0.25)

    def test_shape_mismatch_names_tensor(self):
        rng = np.random.default_rng(4)
        graph = random_graph(rng, n_nodes=3, n_features=5)
        ckpt = small_checkpoint(rng, in_dim=6)
        with pytest.raises(ValidationError, match="features"):
            forward_with_tape(graph, ckpt)

    def test_bad_mask_rejected(self):
        rng = np.random.default_rng(5)
        graph = random_graph(rng, n_nodes=4, n_features=5)
        ckpt = small_checkpoint(rng, 5)
        bad = {rel: np.full(len(graph.edges[rel]), 2.0) for rel in RelationType}
        if any(len(v) for v in bad.values()):
            with pytest.raises(ValidationError):
                forward_with_tape(graph, ckpt, edge_mask=bad)


class TestGradients:
    def test_standard_matches_finite_difference(self):
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            graph = random_graph(rng, n_nodes=int(rng.integers(2, 8)), n_features=6)
            ckpt = small_checkpoint(rng, 6, hidden=6)
            target = (int(rng.integers(0, graph.n_nodes)), int(rng.integers(0, 4)))
            fp = forward_with_tape(graph, ckpt)
            grad = backward_target(fp, target, BackpropMode.STANDARD)

            shape = graph.features.shape

            def f_feat(flat):
                out = forward_with_tape(graph, ckpt, feature_override=flat.reshape(shape))
                return float(out.logits[target])

            fd = finite_diff(f_feat, graph.features.reshape(-1), eps=1e-5)
            worst = max(worst, relative_error(fd, grad.d_features.reshape(-1)))

            # Mask gradients, checked at an interior point of [0, 1].
            base = {r: np.full(len(graph.edges[r]), 0.5) for r in RelationType}
            fp5 = forward_with_tape(graph, ckpt, edge_mask=base)
            grad5 = backward_target(fp5, target, BackpropMode.STANDARD)
            for rel in RelationType:
                n_edges = len(graph.edges[rel])
                if not n_edges:
                    assert grad5.d_edge_mask[rel].shape == (0,)
                    continue

                def f_mask(flat, rel=rel):
                    mask = {r: base[r].copy() for r in base}
                    mask[rel] = flat
                    out = forward_with_tape(graph, ckpt, edge_mask=mask)
                    return float(out.logits[target])

                fd_mask = finite_diff(f_mask, base[rel], eps=1e-5)
                worst = max(worst, relative_error(fd_mask, grad5.d_edge_mask[rel]))
        assert worst <= 1e-4, worst

    def test_out_of_range_target_rejected(self):
        rng = np.random.default_rng(9)
        graph = random_graph(rng, n_nodes=3, n_features=5)
        ckpt = small_checkpoint(rng, 5)
        fp = forward_with_tape(graph, ckpt)
        with pytest.raises(ValidationError):
            backward_target(fp, (99, 0))

    def test_linear_model_gradient_is_weight_row(self):
        # Single isolated node, identity activation, no norm: the gradient of
        # each logit w.r.t. the features is a fixed linear map, nonzero only
        # at the target node.
        rng = np.random.default_rng(11)
        graph = random_graph(rng, n_nodes=3, n_features=5)
        graph = replace(graph, edges={r: () for r in RelationType},
                        onsets=np.array([0, 1, 2]))
        ckpt = small_checkpoint(rng, 5, activation="identity", norm="none")
        fp = forward_with_tape(graph, ckpt)
        grad = backward_target(fp, (1, 2))
        # Effective weight: features feed every relation's self half, summed.
        w_self = sum(ckpt.tensors[f"encoder.0.{r.key}.weight"][:5] for r in RelationType)
        w_hidden = sum(ckpt.tensors[f"encoder.1.{r.key}.weight"][:ckpt.model_config.hidden_dim]
                       for r in RelationType)
        # Residual onset pooling doubles singleton groups.
        expected = 2.0 * w_self @ w_hidden @ ckpt.tensors["mlp.0.weight"] \
            @ ckpt.tensors["mlp.1.weight"][:, 2]
        assert np.abs(grad.d_features[1] - expected).max() <= 1e-12
        assert np.all(grad.d_features[0] == 0.0)
        assert np.all(grad.d_features[2] == 0.0)


class TestModes:
    def test_identity_activation_modes_agree_bitwise(self):
        for seed in range(10):
            rng = np.random.default_rng(300 + seed)
            graph = random_graph(rng, n_nodes=5, n_features=6)
            ckpt = small_checkpoint(rng, 6, activation="identity")
            fp = forward_with_tape(graph, ckpt)
            results = [backward_target(fp, (2, 1), mode) for mode in BackpropMode]
            for other in results[1:]:
                assert np.array_equal(results[0].d_features, other.d_features)
                for rel in RelationType:
                    assert np.array_equal(results[0].d_edge_mask[rel],
                                          other.d_edge_mask[rel])

    def test_relu_rules(self):
        # One ReLU with saved input [-1, 2]; upstream [g1, g2].
        tape = Tape()
        x = tape.leaf(np.array([[-1.0, 2.0]]))
        y = tape.relu(x)
        for mode, upstream, expected in [
            (BackpropMode.STANDARD, [[3.0, -4.0]], [[0.0, -4.0]]),
            (BackpropMode.DECONV, [[3.0, -4.0]], [[3.0, 0.0]]),
            (BackpropMode.GUIDED, [[3.0, -4.0]], [[0.0, 0.0]]),
            (BackpropMode.GUIDED, [[3.0, 4.0]], [[0.0, 4.0]]),
        ]:
            grads = backward(tape, y, np.array(upstream), mode)
            assert np.array_equal(grads[x.idx], np.array(expected))

    def test_guided_support_within_deconv(self):
        for seed in range(10):
            rng = np.random.default_rng(800 + seed)
            graph = random_graph(rng, n_nodes=5, n_features=6)
            ckpt = small_checkpoint(rng, 6)
            fp = forward_with_tape(graph, ckpt)
            guided = backward_target(fp, (1, 0), BackpropMode.GUIDED)
            deconv = backward_target(fp, (1, 0), BackpropMode.DECONV)
            for rel in RelationType:
                nz = guided.d_edge_mask[rel] != 0.0
                assert np.all(deconv.d_edge_mask[rel][nz] != 0.0)


class TestMasking:
    def test_zero_mask_equals_edge_removal(self):
        for seed in range(10):
            rng = np.random.default_rng(500 + seed)
            graph = random_graph(rng, n_nodes=6, n_features=6)
            ckpt = small_checkpoint(rng, 6)
            zero = {r: np.zeros(len(graph.edges[r])) for r in RelationType}
            masked = forward_with_tape(graph, ckpt, edge_mask=zero).logits
            edgeless = forward_with_tape(
                replace(graph, edges={r: () for r in RelationType}), ckpt).logits
            assert np.abs(masked - edgeless).max() <= 1e-12

    def test_binary_mask_matches_subgraph_when_neighborhoods_whole(self):
        # The two semantics coincide exactly when each node keeps either all
        # or none of its in-edges per relation.
        for seed in range(10):
            rng = np.random.default_rng(600 + seed)
            graph = random_graph(rng, n_nodes=6, n_features=6)
            ckpt = small_checkpoint(rng, 6)
            keep_node = {r: rng.random(graph.n_nodes) < 0.5 for r in RelationType}
            mask = {}
            kept_edges = {}
            for rel in RelationType:
                pairs = graph.edges[rel]
                mask[rel] = np.array([1.0 if keep_node[rel][d] else 0.0
                                      for _, d in pairs])
                kept_edges[rel] = tuple(p for p in pairs if keep_node[rel][p[1]])
            masked = forward_with_tape(graph, ckpt, edge_mask=mask).logits
            rebuilt = forward_with_tape(replace(graph, edges=kept_edges), ckpt).logits
            assert np.abs(masked - rebuilt).max() <= 1e-12

    def test_forward_and_backward_deterministic(self):
        rng = np.random.default_rng(7)
        graph = random_graph(rng, n_nodes=6, n_features=6)
        ckpt = small_checkpoint(rng, 6)
        a = forward_with_tape(graph, ckpt)
        b = forward_with_tape(graph, ckpt)
        assert np.array_equal(a.logits, b.logits)
        ga = backward_target(a, (0, 0))
        gb = backward_target(b, (0, 0))
        assert np.array_equal(ga.d_features, gb.d_features)
        for rel in RelationType:
            assert np.array_equal(ga.d_edge_mask[rel], gb.d_edge_mask[rel])
