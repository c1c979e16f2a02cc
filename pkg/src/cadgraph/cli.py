"""Command-line interface.

Subcommands: ingest, predict, explain, evaluate, train, synth, serve.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
Errors print one machine-parsable line to stderr: "error: <kind>: <msg>".
CADGRAPH_DATA_DIR overrides the default --data-dir.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import assets
from .annotations import load_annotations
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import CadgraphError, NumericError, ScoreParseError, UnsupportedFormatError, ValidationError
from .explain import ExplainConfig, explain
from .graph import FeatureSpec, build_graph
from .metrics import MetricConfig, evaluate, table_json_bytes
from .model import TrainConfig, predict, train
from .store import ScoreStore, parse_score_bytes
from .synth import generate_corpus


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: usage: {message}", file=sys.stderr)
        raise SystemExit(1)


def _writer_path(value: str) -> Path:
    path = Path(value)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_score(path: str):
    return parse_score_bytes(Path(path).read_bytes())


def _load_ckpt(path: str | None):
    if path is None:
        return assets.toy_checkpoint()
    return load_checkpoint(Path(path).read_bytes())


def _default_data_dir() -> str:
    return os.environ.get("CADGRAPH_DATA_DIR", "data")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cadgraph")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="store a MusicXML/MEI file and write its MEI export")
    p.add_argument("--input", required=True)
    p.add_argument("--data-dir", default=_default_data_dir())
    p.add_argument("--mei-out", default=None)
    p.add_argument("--graph-out", default=None)

    p = sub.add_parser("predict", help="write per-note cadence predictions as JSON")
    p.add_argument("--score", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("explain", help="write an explanation JSON for one note")
    p.add_argument("--score", required=True)
    p.add_argument("--note", required=True)
    p.add_argument("--method", default="ig", choices=["saliency", "ig", "deconv", "gbp"])
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--ig-steps", type=int, default=50)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("evaluate", help="characterization table over pieces and methods")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--methods", default="saliency,gbp,deconv,ig")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--ig-steps", type=int, default=50)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", help="train a checkpoint on a synth corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the HTTP JSON service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--data-dir", default=_default_data_dir())
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--static-dir", default=None)
    return parser


def _cmd_ingest(args) -> int:
    data = Path(args.input).read_bytes()
    store = ScoreStore(args.data_dir)
    score_id = store.ingest(data)
    mei = store.mei_for(score_id)
    mei_out = args.mei_out or str(Path(args.data_dir) / f"{score_id}.mei")
    _writer_path(mei_out).write_bytes(mei)
    result = {"score_id": score_id, "mei": mei_out}
    if args.graph_out:
        from .graph import graph_to_json

        body = json.dumps(graph_to_json(store.graph_for(score_id)), sort_keys=True)
        _writer_path(args.graph_out).write_text(body + "\n", encoding="utf-8")
        result["graph"] = args.graph_out
    print(json.dumps(result))
    return 0


def _cmd_predict(args) -> int:
    score = _load_score(args.score)
    ckpt = _load_ckpt(args.checkpoint)
    graph = build_graph(score, FeatureSpec(ckpt.feature_spec))
    prediction = predict(graph, ckpt)
    body = json.dumps(prediction.to_json(), sort_keys=True, indent=1) + "\n"
    if args.out:
        _writer_path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    return 0


def _cmd_explain(args) -> int:
    score = _load_score(args.score)
    ckpt = _load_ckpt(args.checkpoint)
    graph = build_graph(score, FeatureSpec(ckpt.feature_spec))
    cfg = ExplainConfig(method=args.method, top_k=args.k, ig_steps=args.ig_steps)
    expl = explain(graph, ckpt, args.note, cfg)
    body = json.dumps(expl.to_json(graph, feature_top_k=args.k),
                      sort_keys=True, indent=1) + "\n"
    if args.out:
        _writer_path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    return 0


def _cmd_evaluate(args) -> int:
    ckpt = _load_ckpt(args.checkpoint)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    pieces = []
    for path in args.scores:
        score = _load_score(path)
        pieces.append((Path(path).stem, build_graph(score, FeatureSpec(ckpt.feature_spec))))
    table = evaluate(pieces, ckpt, methods, MetricConfig(),
                     top_k=args.k, ig_steps=args.ig_steps)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "table.json").write_bytes(table_json_bytes(table))
    (out_dir / "table.txt").write_text(table.to_text(), encoding="utf-8")
    (out_dir / "instances.csv").write_text(table.to_csv(), encoding="utf-8")
    sys.stdout.write(table.to_text())
    return 0


def _cmd_train(args) -> int:
    from .checkpoint import ModelConfig

    corpus_dir = Path(args.corpus)
    pairs = []
    for xml_path in sorted(corpus_dir.glob("*.musicxml")):
        score = _load_score(str(xml_path))
        ann_path = xml_path.with_suffix(".cadences.json")
        annotations = load_annotations(ann_path.read_bytes(), score) if ann_path.exists() \
            else load_annotations(b"[]", score)
        pairs.append((build_graph(score, FeatureSpec("base-v1")), annotations))
    if not pairs:
        raise ValidationError(f"no .musicxml files in {corpus_dir}")
    cfg = TrainConfig(seed=args.seed, epochs=args.epochs, learning_rate=args.learning_rate)
    result = train(pairs, cfg, ModelConfig(hidden_dim=args.hidden_dim))
    _writer_path(args.out).write_bytes(save_checkpoint(result.checkpoint))
    if args.log:
        _writer_path(args.log).write_text(result.history_jsonl(), encoding="utf-8")
    final = result.history[-1] if result.history else {}
    print(json.dumps({"checkpoint": args.out, **final}))
    return 0


def _cmd_synth(args) -> int:
    from .synth import onset_form_annotations
    from .writers import write_musicxml

    corpus = generate_corpus(args.seed, args.n)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, piece in enumerate(corpus.pieces):
        stem = out_dir / f"piece_{i:04d}"
        stem.with_suffix(".musicxml").write_bytes(write_musicxml(piece.score))
        # Onset-form labels survive the MusicXML round trip (no note ids).
        ann = json.dumps(onset_form_annotations(piece), indent=1) + "\n"
        stem.with_suffix(".cadences.json").write_text(ann, encoding="utf-8")
    (out_dir / "manifest.json").write_text(
        json.dumps({"seed": args.seed, "n": args.n, "class_counts": corpus.class_counts},
                   sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(json.dumps({"out": str(out_dir), "class_counts": corpus.class_counts}))
    return 0


def _cmd_serve(args) -> int:
    from .server import AppState, ServerConfig, serve

    ckpt = _load_ckpt(args.checkpoint)
    store = ScoreStore(args.data_dir)
    config = ServerConfig(host=args.host, port=args.port, data_dir=args.data_dir,
                          static_dir=args.static_dir)
    state = AppState(store, ckpt, config)
    server = serve(state)
    print(json.dumps({"listening": f"http://{args.host}:{server.server_address[1]}",
                      "checkpoint_hash": state.checkpoint_hash}))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "predict": _cmd_predict,
    "explain": _cmd_explain,
    "evaluate": _cmd_evaluate,
    "train": _cmd_train,
    "synth": _cmd_synth,
    "serve": _cmd_serve,
}


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        print("error: usage: missing subcommand", file=sys.stderr)
        return 1
    handler = _COMMANDS[args.command]
    try:
        return handler(args)
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 3
    except (ScoreParseError, UnsupportedFormatError, ValidationError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2
    except CadgraphError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run_cli(sys.argv[1:]))
