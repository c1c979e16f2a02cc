"""Cadence model: pooling, SMOTE, prediction, checkpoint IO, synth corpus."""

import numpy as np
import pytest

from cadgraph.checkpoint import (
    Checkpoint,
    ModelConfig,
    checkpoint_hash,
    load_checkpoint,
    random_checkpoint,
    save_checkpoint,
    zero_checkpoint,
)
from cadgraph.errors import ValidationError
from cadgraph.graph import RelationType, build_graph
from cadgraph.model import macro_f1, onset_pool, predict, smote_oversample
from cadgraph.synth import generate_corpus

from util import random_graph, small_checkpoint


class TestOnsetPool:
    def test_distinct_onsets_double(self):
        rng = np.random.default_rng(0)
        emb = rng.normal(size=(5, 3))
        out = onset_pool(emb, np.arange(5))
        assert np.allclose(out, 2 * emb)

    def test_opposite_embeddings_cancel(self):
        emb = np.array([[1.0, -2.0], [-1.0, 2.0]])
        out = onset_pool(emb, np.array([4, 4]))
        assert np.array_equal(out, emb)

    def test_group_component_identical_within_onset(self):
        rng = np.random.default_rng(1)
        emb = rng.normal(size=(12, 4))
        onsets = rng.integers(0, 4, size=12)
        out = onset_pool(emb, onsets)
        group_part = out - emb
        for t in set(int(v) for v in onsets):
            members = np.flatnonzero(onsets == t)
            expected = emb[members].mean(axis=0)
            for m in members:
                assert np.allclose(group_part[m], expected, atol=1e-15)


class TestPredict:
    def test_zero_checkpoint_uniform(self):
        rng = np.random.default_rng(2)
        graph = random_graph(rng, n_nodes=4, n_features=6)
        ckpt = zero_checkpoint(ModelConfig(hidden_dim=8), 6, feature_spec="custom")
        pred = predict(graph, ckpt)
        assert np.allclose(pred.probs, 0.25)
        assert set(pred.classes) == {"no-cad"}  # argmax ties break low

    def test_probabilities_sum_to_one(self):
        ckpt = _toy()
        for piece in generate_corpus(10, 3).pieces:
            pred = predict(build_graph(piece.score), ckpt)
            assert np.allclose(pred.probs.sum(axis=1), 1.0, atol=1e-9)

    def test_feature_spec_mismatch_rejected(self):
        rng = np.random.default_rng(3)
        graph = random_graph(rng, n_nodes=3, n_features=40)
        ckpt = _toy()
        with pytest.raises(ValidationError):
            predict(graph, ckpt)

    def test_permutation_equivariance(self):
        from dataclasses import replace

        rng = np.random.default_rng(4)
        graph = random_graph(rng, n_nodes=7, n_features=6)
        ckpt = small_checkpoint(rng, 6)
        pred = predict(graph, ckpt)

        perm = rng.permutation(7)
        inverse = np.argsort(perm)
        permuted = replace(
            graph,
            node_ids=tuple(graph.node_ids[i] for i in perm),
            edges={rel: tuple(sorted((int(inverse[s]), int(inverse[d]))
                                     for s, d in graph.edges[rel]))
                   for rel in RelationType},
            features=graph.features[perm],
            onsets=graph.onsets[perm],
        )
        pred2 = predict(permuted, ckpt)
        for i, nid in enumerate(permuted.node_ids):
            j = graph.node_ids.index(nid)
            assert pred2.classes[i] == pred.classes[j]
            assert np.allclose(pred2.probs[i], pred.probs[j], atol=1e-12)


def _toy():
    from cadgraph import assets

    return assets.toy_checkpoint()


class TestSmote:
    def test_balanced_input_unchanged(self):
        rng = np.random.default_rng(5)
        emb = rng.normal(size=(8, 3))
        labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        result = smote_oversample(emb, labels, k_nn=3, seed=1)
        assert np.array_equal(result.embeddings, emb)
        assert np.array_equal(result.labels, labels)
        assert result.provenance == []

    def test_forced_lambda_zero_duplicates(self):
        class ZeroRng:
            def integers(self, lo, hi):
                return np.int64(0)

            def uniform(self, lo, hi):
                return 0.0

        emb = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0], [7.0, 5.0]])
        labels = np.array([0, 0, 1, 1, 1])
        result = smote_oversample(emb, labels, k_nn=2, rng=ZeroRng())
        synth = result.embeddings[5:]
        assert np.array_equal(synth[0], emb[0])  # lambda = 0 copies the parent

    def test_counts_balanced_and_convex(self):
        rng = np.random.default_rng(6)
        emb = np.concatenate([rng.normal(size=(12, 4)),
                              rng.normal(size=(3, 4)) + 5.0,
                              rng.normal(size=(2, 4)) - 5.0])
        labels = np.array([0] * 12 + [1] * 3 + [3] * 2)
        result = smote_oversample(emb, labels, k_nn=5, seed=9)
        counts = np.bincount(result.labels, minlength=4)
        assert counts[0] == counts[1] == counts[3] == 12
        assert counts[2] == 0  # absent classes stay absent
        n = len(labels)
        assert np.array_equal(result.embeddings[:n], emb)
        for row, (parent, neighbor, lam) in enumerate(result.provenance, start=n):
            s = result.embeddings[row]
            x = emb[parent]
            x_nn = emb[neighbor]
            assert labels[parent] == labels[neighbor] == result.labels[row]
            assert np.linalg.norm((s - x) - lam * (x_nn - x)) <= 1e-9

    def test_singleton_minority_rejected(self):
        emb = np.zeros((4, 2))
        labels = np.array([0, 0, 0, 1])
        with pytest.raises(ValidationError, match="k_nn"):
            smote_oversample(emb, labels)

    def test_seeded_determinism(self):
        rng_a = np.random.default_rng(7)
        emb = rng_a.normal(size=(10, 3))
        labels = np.array([0] * 7 + [1] * 3)
        r1 = smote_oversample(emb, labels, seed=42)
        r2 = smote_oversample(emb, labels, seed=42)
        assert np.array_equal(r1.embeddings, r2.embeddings)
        assert r1.provenance == r2.provenance


class TestCheckpointIO:
    def test_save_load_save_byte_identical(self):
        rng = np.random.default_rng(8)
        ckpt = random_checkpoint(ModelConfig(hidden_dim=4), 6, rng, feature_spec="custom")
        data = save_checkpoint(ckpt)
        reloaded = load_checkpoint(data)
        assert save_checkpoint(reloaded) == data
        for name, tensor in ckpt.tensors.items():
            assert np.array_equal(reloaded.tensors[name], tensor)

    def test_tampered_shape_rejected_with_name(self):
        import json

        rng = np.random.default_rng(9)
        ckpt = random_checkpoint(ModelConfig(hidden_dim=4), 6, rng, feature_spec="custom")
        payload = json.loads(save_checkpoint(ckpt))
        payload["tensors"]["mlp.0.bias"]["shape"] = [3]
        with pytest.raises(ValidationError, match="mlp.0.bias"):
            load_checkpoint(json.dumps(payload))

    def test_version_mismatch_rejected(self):
        import json

        rng = np.random.default_rng(10)
        ckpt = random_checkpoint(ModelConfig(hidden_dim=4), 6, rng, feature_spec="custom")
        payload = json.loads(save_checkpoint(ckpt))
        payload["format_version"] = 99
        with pytest.raises(ValidationError, match="format_version"):
            load_checkpoint(json.dumps(payload))

    def test_nonfinite_rejected(self):
        import json

        rng = np.random.default_rng(11)
        ckpt = random_checkpoint(ModelConfig(hidden_dim=4), 6, rng, feature_spec="custom")
        payload = json.loads(save_checkpoint(ckpt))
        payload["tensors"]["mlp.1.bias"]["data"][0] = 1e999  # json inf
        with pytest.raises(ValidationError):
            load_checkpoint(json.dumps(payload))

    def test_reloaded_checkpoint_predicts_identically(self):
        ckpt = _toy()
        reloaded = load_checkpoint(save_checkpoint(ckpt))
        assert checkpoint_hash(reloaded) == checkpoint_hash(ckpt)
        for piece in generate_corpus(12, 2).pieces:
            graph = build_graph(piece.score)
            a = predict(graph, ckpt).probs
            b = predict(graph, reloaded).probs
            assert np.abs(a - b).max() <= 1e-15


class TestSynthCorpus:
    def test_deterministic(self):
        a = generate_corpus(123, 8)
        b = generate_corpus(123, 8)
        for pa, pb in zip(a.pieces, b.pieces):
            assert pa.score == pb.score
            assert pa.annotations.labels == pb.annotations.labels
            assert pa.pattern == pb.pattern

    def test_class_histogram_matches_bookkeeping(self):
        corpus = generate_corpus(55, 200)
        observed = {"PAC": 0, "IAC": 0, "HC": 0, "none": 0}
        for piece in corpus.pieces:
            observed[piece.pattern] += 1
        assert observed == corpus.class_counts
        assert sum(observed.values()) == 200
        for pattern, frac in [("PAC", 0.3), ("IAC", 0.25), ("HC", 0.25), ("none", 0.2)]:
            assert abs(observed[pattern] / 200 - frac) < 0.12

    def test_pac_bass_motion(self):
        corpus = generate_corpus(91, 60)
        checked = 0
        for piece in corpus.pieces:
            if piece.pattern != "PAC":
                continue
            notes = piece.score.notes
            onsets = sorted({n.onset_tick for n in notes})
            last, penult = onsets[-1], onsets[-2]
            low_last = min(n.midi for n in notes if n.onset_tick == last)
            low_penult = min(n.midi for n in notes if n.onset_tick == penult)
            assert low_last - low_penult in (-7, 5)  # descending fifth / ascending fourth
            checked += 1
        assert checked >= 5

    def test_phrase_shape(self):
        for piece in generate_corpus(17, 30).pieces:
            onsets = sorted({n.onset_tick for n in piece.score.notes})
            assert 8 <= len(onsets) <= 16
            if piece.pattern != "none":
                arrival = onsets[-1]
                labelled = set(piece.annotations.labels)
                assert labelled == {n.id for n in piece.score.notes
                                    if n.onset_tick == arrival}


class TestMacroF1:
    def test_against_sklearn(self):
        sklearn = pytest.importorskip("sklearn.metrics")
        rng = np.random.default_rng(13)
        for _ in range(20):
            y_true = rng.integers(0, 4, size=50)
            y_pred = rng.integers(0, 4, size=50)
            ours = macro_f1(y_true, y_pred)
            theirs = sklearn.f1_score(y_true, y_pred, average="macro",
                                      labels=[0, 1, 2, 3], zero_division=0)
            assert abs(ours - theirs) <= 1e-12
