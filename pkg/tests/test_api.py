"""CLI subcommands and the HTTP JSON service."""

import json
import threading
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from urllib.error import HTTPError

import pytest

from cadgraph import assets
from cadgraph.checkpoint import save_checkpoint
from cadgraph.cli import run_cli
from cadgraph.server import AppState, ServerConfig, serve
from cadgraph.store import ScoreStore

PIECE = "adagio_f_minor"


@pytest.fixture(scope="module")
def piece_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("pieces") / f"{PIECE}.musicxml"
    path.write_bytes(assets.piece_bytes(PIECE))
    return path


@pytest.fixture(scope="module")
def ckpt_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "toy.json"
    path.write_bytes(save_checkpoint(assets.toy_checkpoint()))
    return path


class TestCli:
    def test_unknown_subcommand_exits_one(self, capsys):
        assert run_cli(["frobnicate"]) == 1
        assert capsys.readouterr().err.startswith("error: usage:")

    def test_missing_subcommand_exits_one(self, capsys):
        assert run_cli([]) == 1

    def test_data_error_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.musicxml"
        bad.write_bytes(b"<score-timewise/>")
        code = run_cli(["predict", "--score", str(bad), "--out", str(tmp_path / "o.json")])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error: data:")
        assert "\n" not in err.strip()

    def test_predict_writes_probabilities(self, piece_path, ckpt_path, tmp_path):
        out = tmp_path / "pred.json"
        code = run_cli(["predict", "--score", str(piece_path),
                        "--checkpoint", str(ckpt_path), "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload["predictions"]) == 61
        for entry in payload["predictions"].values():
            assert abs(sum(entry["probs"]) - 1.0) <= 1e-9

    def test_explain_respects_top_k(self, piece_path, ckpt_path, tmp_path):
        out = tmp_path / "expl.json"
        code = run_cli(["explain", "--score", str(piece_path), "--note", "p1-0",
                        "--method", "ig", "--k", "10", "--ig-steps", "8",
                        "--checkpoint", str(ckpt_path), "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["target_note_id"] == "p1-0"
        assert len(payload["probs"]) == 4
        for rel, edges in payload["edges"].items():
            assert len(edges) <= 10
        assert len(payload["features"]["target"]) <= 10

    def test_explain_unknown_note_exits_two(self, piece_path, ckpt_path, tmp_path):
        code = run_cli(["explain", "--score", str(piece_path), "--note", "zz",
                        "--checkpoint", str(ckpt_path),
                        "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_ingest_writes_store_and_mei(self, piece_path, tmp_path):
        data_dir = tmp_path / "store"
        code = run_cli(["ingest", "--input", str(piece_path),
                        "--data-dir", str(data_dir)])
        assert code == 0
        stored = list(data_dir.glob("*.score"))
        assert len(stored) == 1
        assert list(data_dir.glob("*.mei"))

    def test_synth_then_train_roundtrip(self, tmp_path, capsys):
        corpus_dir = tmp_path / "corpus"
        assert run_cli(["synth", "--seed", "5", "--n", "6",
                        "--out", str(corpus_dir)]) == 0
        assert len(list(corpus_dir.glob("*.musicxml"))) == 6
        manifest = json.loads((corpus_dir / "manifest.json").read_text())
        assert sum(manifest["class_counts"].values()) == 6

        ckpt_out = tmp_path / "trained.json"
        log_out = tmp_path / "log.jsonl"
        code = run_cli(["train", "--corpus", str(corpus_dir), "--seed", "3",
                        "--epochs", "2", "--hidden-dim", "8",
                        "--out", str(ckpt_out), "--log", str(log_out)])
        assert code == 0
        assert ckpt_out.exists()
        assert len(log_out.read_text().strip().split("\n")) == 2

    def test_evaluate_emits_table_files(self, ckpt_path, tmp_path):
        corpus_dir = tmp_path / "corpus6"
        assert run_cli(["synth", "--seed", "99", "--n", "6",
                        "--out", str(corpus_dir)]) == 0
        out_dir = tmp_path / "eval"
        scores = sorted(str(p) for p in corpus_dir.glob("*.musicxml"))
        code = run_cli(["evaluate", "--scores", *scores,
                        "--checkpoint", str(ckpt_path), "--ig-steps", "4",
                        "--out-dir", str(out_dir)])
        assert code == 0
        table = json.loads((out_dir / "table.json").read_text())
        assert len(table["pieces"]) == 6
        assert table["methods"] == ["saliency", "gbp", "deconv", "ig"]
        for row in table["cells"].values():
            for value in row.values():
                assert value is None or 0.0 <= value <= 1.0
        assert (out_dir / "table.txt").read_text().startswith("Pieces/Model")
        assert (out_dir / "instances.csv").read_text().startswith(
            "piece,note_id,method,fid_plus,fid_minus")

    def test_cli_matches_http_explanation(self, piece_path, ckpt_path, tmp_path, server):
        base, state = server
        score_id = state.store.ingest(assets.piece_bytes(PIECE))
        http_body = _get(f"{base}/api/scores/{score_id}/explanations/p1-0?method=saliency&k=5")
        out = tmp_path / "cli.json"
        assert run_cli(["explain", "--score", str(piece_path), "--note", "p1-0",
                        "--method", "saliency", "--k", "5",
                        "--checkpoint", str(ckpt_path), "--out", str(out)]) == 0
        cli_payload = json.loads(out.read_text())
        http_payload = json.loads(http_body)
        assert cli_payload == http_payload


def _get(url: str) -> bytes:
    with urllib.request.urlopen(url) as response:
        return response.read()


def _get_json(url: str):
    return json.loads(_get(url))


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    store = ScoreStore(tmp_path_factory.mktemp("server_store"))
    state = AppState(store, assets.toy_checkpoint(),
                     ServerConfig(host="127.0.0.1", port=0))
    httpd = serve(state)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    yield base, state
    httpd.shutdown()
    httpd.server_close()


class TestHttp:
    def test_health(self, server):
        base, state = server
        payload = _get_json(f"{base}/api/health")
        assert payload["status"] == "ok"
        assert payload["checkpoint_hash"] == state.checkpoint_hash

    def test_upload_and_list(self, server):
        base, _ = server
        data = assets.piece_bytes(PIECE)
        request = urllib.request.Request(f"{base}/api/scores", data=data, method="POST")
        with urllib.request.urlopen(request) as response:
            first = json.loads(response.read())["score_id"]
        # Idempotent re-upload.
        request = urllib.request.Request(f"{base}/api/scores", data=data, method="POST")
        with urllib.request.urlopen(request) as response:
            second = json.loads(response.read())["score_id"]
        assert first == second
        assert first in _get_json(f"{base}/api/scores")["scores"]

    def test_unknown_score_404(self, server):
        base, _ = server
        with pytest.raises(HTTPError) as err:
            _get(f"{base}/api/scores/doesnotexist/mei")
        assert err.value.code == 404
        assert json.loads(err.value.read())["error"] == "score_not_found"

    def test_unknown_note_404(self, server):
        base, state = server
        sid = state.store.ingest(assets.piece_bytes(PIECE))
        with pytest.raises(HTTPError) as err:
            _get(f"{base}/api/scores/{sid}/explanations/nope")
        assert err.value.code == 404
        assert json.loads(err.value.read())["error"] == "note_not_found"

    def test_bad_method_400(self, server):
        base, state = server
        sid = state.store.ingest(assets.piece_bytes(PIECE))
        with pytest.raises(HTTPError) as err:
            _get(f"{base}/api/scores/{sid}/explanations/p1-0?method=shapley")
        assert err.value.code == 400
        assert json.loads(err.value.read())["error"] == "invalid_method"

    def test_mei_and_graph_and_predictions(self, server):
        base, state = server
        sid = state.store.ingest(assets.piece_bytes(PIECE))
        mei = _get(f"{base}/api/scores/{sid}/mei")
        assert mei.startswith(b"<?xml")
        graph = _get_json(f"{base}/api/scores/{sid}/graph")
        assert set(graph["edges"]) == {"onset", "consecutive", "during", "rest"}
        assert len(graph["node_ids"]) == 61
        predictions = _get_json(f"{base}/api/scores/{sid}/predictions")["predictions"]
        assert len(predictions) == 61

    def test_graph_counts_match_cli_ingest(self, server, tmp_path):
        base, state = server
        sid = state.store.ingest(assets.piece_bytes(PIECE))
        http_graph = _get_json(f"{base}/api/scores/{sid}/graph")
        from cadgraph.graph import build_graph, graph_to_json
        from cadgraph.musicxml import parse_musicxml

        local = graph_to_json(build_graph(parse_musicxml(assets.piece_bytes(PIECE))))
        assert {k: len(v) for k, v in http_graph["edges"].items()} == \
            {k: len(v) for k, v in local["edges"].items()}

    def test_explanation_idempotent_byte_identical(self, server):
        base, state = server
        sid = state.store.ingest(assets.piece_bytes(PIECE))
        url = f"{base}/api/scores/{sid}/explanations/p1-3?method=ig&k=4"
        assert _get(url) == _get(url)

    def test_concurrent_explanations_no_cross_talk(self, server):
        base, state = server
        sid = state.store.ingest(assets.piece_bytes(PIECE))
        notes = [f"p1-{i}" for i in range(8)]
        url = f"{base}/api/scores/{sid}/explanations/{{}}?method=saliency&k=3"
        serial = {n: _get(url.format(n)) for n in notes}
        state.store.get(sid).explanation_cache.clear()
        with ThreadPoolExecutor(max_workers=6) as pool:
            parallel = dict(zip(notes, pool.map(lambda n: _get(url.format(n)), notes)))
        for n in notes:
            assert parallel[n] == serial[n]
            assert json.loads(parallel[n])["target_note_id"] == n

    def test_restart_reproduces_bodies(self, server, tmp_path_factory):
        base, state = server
        sid = state.store.ingest(assets.piece_bytes(PIECE))
        url_tail = f"/api/scores/{sid}/explanations/p1-5?method=gbp&k=3"
        body = _get(base + url_tail)
        # New store over the same directory, fresh caches.
        store2 = ScoreStore(state.store.data_dir)
        state2 = AppState(store2, assets.toy_checkpoint(),
                          ServerConfig(host="127.0.0.1", port=0))
        httpd2 = serve(state2)
        thread = threading.Thread(target=httpd2.serve_forever, daemon=True)
        thread.start()
        try:
            base2 = f"http://127.0.0.1:{httpd2.server_address[1]}"
            assert sid in _get_json(f"{base2}/api/scores")["scores"]
            assert _get(base2 + url_tail) == body
        finally:
            httpd2.shutdown()
            httpd2.server_close()
