"""HTTP JSON service backing the score viewer.

Endpoints (all JSON unless noted):

  GET  /api/health                       {status, checkpoint_hash}
  GET  /api/scores                       {scores: [id, ...]}
  POST /api/scores                       MusicXML/MEI body -> {score_id}
  GET  /api/scores/{id}/mei              MEI bytes (application/xml)
  GET  /api/scores/{id}/graph            input-edge JSON for the graph view
  GET  /api/scores/{id}/predictions      per-note class and probabilities
  GET  /api/scores/{id}/explanations/{note_id}?method=&k=   explanation JSON

Explanations are cached by (score, note, method, k, checkpoint), so equal
requests return byte-identical bodies. Static files from an optional
frontend directory are served at /.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .checkpoint import Checkpoint, checkpoint_hash
from .errors import CadgraphError, ScoreParseError, UnsupportedFormatError, ValidationError
from .explain import METHODS, ExplainConfig, explain
from .mei import export_mei
from .graph import graph_to_json
from .model import predict
from .store import ScoreStore

_EXPLAIN_RE = re.compile(r"^/api/scores/([^/]+)/explanations/([^/]+)$")

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".cjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".json": "application/json",
    ".wasm": "application/wasm",
}


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8400
    data_dir: str = "data"
    static_dir: str | None = None
    default_method: str = "ig"
    default_k: int = 10
    ig_steps: int = 50


class AppState:
    def __init__(self, store: ScoreStore, ckpt: Checkpoint, config: ServerConfig):
        self.store = store
        self.checkpoint = ckpt
        self.config = config
        self.checkpoint_hash = checkpoint_hash(ckpt)
        self._explain_lock = threading.Lock()

    def predictions_for(self, score_id: str):
        record = self.store.get(score_id)
        if record.predictions is None:
            record.predictions = predict(self.store.graph_for(score_id), self.checkpoint)
        return record.predictions

    def mei_with_predictions(self, score_id: str) -> bytes:
        """MEI export with the model's cadence labels attached as <harm>."""
        record = self.store.get(score_id)
        if record.mei is None:
            prediction = self.predictions_for(score_id)
            labels = {nid: cls for nid, cls in zip(prediction.note_ids, prediction.classes)
                      if cls != "no-cad"}
            record.mei = export_mei(record.score, predictions=labels)
        return record.mei

    def explanation_for(self, score_id: str, note_id: str, method: str, k: int) -> bytes:
        record = self.store.get(score_id)
        key = (note_id, method, k, self.checkpoint_hash)
        with self._explain_lock:
            cached = record.explanation_cache.get(key)
        if cached is not None:
            return cached
        graph = self.store.graph_for(score_id)
        cfg = ExplainConfig(method=method, top_k=k, ig_steps=self.config.ig_steps)
        expl = explain(graph, self.checkpoint, note_id, cfg)
        body = (json.dumps(expl.to_json(graph, feature_top_k=k), sort_keys=True)
                + "\n").encode("utf-8")
        with self._explain_lock:
            record.explanation_cache[key] = body
        return body


def make_handler(state: AppState):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _send(self, status: int, body: bytes, content_type: str = "application/json"):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, status: int, payload: dict):
            self._send(status, (json.dumps(payload, sort_keys=True) + "\n").encode("utf-8"))

        def _error(self, status: int, code: str):
            self._send_json(status, {"error": code})

        def do_GET(self):
            try:
                self._route_get()
            except BrokenPipeError:
                pass
            except CadgraphError as exc:
                self._send_json(400, {"error": "invalid_request", "detail": str(exc)})

        def _route_get(self):
            url = urlparse(self.path)
            path = url.path
            if path == "/api/health":
                self._send_json(200, {"status": "ok",
                                      "checkpoint_hash": state.checkpoint_hash})
                return
            if path == "/api/scores":
                self._send_json(200, {"scores": state.store.ids()})
                return
            match = _EXPLAIN_RE.match(path)
            if match:
                self._explanations(match.group(1), match.group(2), url.query)
                return
            if path.startswith("/api/scores/"):
                tail = path[len("/api/scores/"):]
                parts = tail.split("/")
                if len(parts) == 2:
                    score_id, what = parts
                    try:
                        record = state.store.get(score_id)
                    except KeyError:
                        self._error(404, "score_not_found")
                        return
                    if what == "mei":
                        self._send(200, state.mei_with_predictions(score_id),
                                   "application/xml; charset=utf-8")
                        return
                    if what == "graph":
                        graph = state.store.graph_for(score_id)
                        self._send_json(200, graph_to_json(graph))
                        return
                    if what == "predictions":
                        self._send_json(200, state.predictions_for(record.score_id).to_json())
                        return
                self._error(404, "not_found")
                return
            self._static(path)

        def _explanations(self, score_id: str, note_id: str, query: str):
            try:
                state.store.get(score_id)
            except KeyError:
                self._error(404, "score_not_found")
                return
            params = parse_qs(query)
            method = params.get("method", [state.config.default_method])[0]
            if method not in METHODS:
                self._error(400, "invalid_method")
                return
            try:
                k = int(params.get("k", [str(state.config.default_k)])[0])
            except ValueError:
                self._error(400, "invalid_k")
                return
            if k < 1:
                self._error(400, "invalid_k")
                return
            graph = state.store.graph_for(score_id)
            if note_id not in graph.node_ids:
                self._error(404, "note_not_found")
                return
            body = state.explanation_for(score_id, note_id, method, k)
            self._send(200, body)

        def _static(self, path: str):
            static_dir = state.config.static_dir
            if static_dir is None:
                self._error(404, "not_found")
                return
            rel = path.lstrip("/") or "index.html"
            target = (Path(static_dir) / rel).resolve()
            root = Path(static_dir).resolve()
            if not str(target).startswith(str(root)) or not target.is_file():
                self._error(404, "not_found")
                return
            ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
            self._send(200, target.read_bytes(), ctype)

        def do_POST(self):
            url = urlparse(self.path)
            if url.path != "/api/scores":
                self._error(404, "not_found")
                return
            length = int(self.headers.get("Content-Length", "0"))
            data = self.rfile.read(length)
            try:
                score_id = state.store.ingest(data)
            except (ScoreParseError, UnsupportedFormatError, ValidationError) as exc:
                self._send_json(400, {"error": "invalid_score", "detail": str(exc)})
                return
            self._send_json(200, {"score_id": score_id})

    return Handler


def serve(state: AppState) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((state.config.host, state.config.port),
                                 make_handler(state))
    return server
