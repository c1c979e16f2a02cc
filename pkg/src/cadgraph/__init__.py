"""Score graphs, cadence classification, and gradient-based explanations."""

from .annotations import load_annotations
from .checkpoint import Checkpoint, ModelConfig, load_checkpoint, save_checkpoint
from .engine import BackpropMode, finite_diff
from .errors import (
    CadgraphError,
    NumericError,
    ScoreParseError,
    UnsupportedFormatError,
    ValidationError,
)
from .explain import ExplainConfig, Explanation, explain, integrated_gradients, topk_select
from .graph import FeatureSpec, RelationType, ScoreGraph, build_graph, oracle_edges
from .mei import export_mei, parse_mei
from .metrics import FidelityReport, MetricConfig, characterization, evaluate, fidelity
from .model import CadencePrediction, TrainConfig, onset_pool, predict, smote_oversample, train
from .musicxml import parse_musicxml
from .network import GradientResult, backward_target, forward_with_tape
from .score import CADENCE_CLASSES, CadenceAnnotations, NoteEvent, Pitch, RestEvent, Score
from .synth import generate_corpus, synth_corpus
from .writers import write_musicxml

__version__ = "0.1.0"

__all__ = [
    "BackpropMode",
    "CADENCE_CLASSES",
    "CadenceAnnotations",
    "CadencePrediction",
    "CadgraphError",
    "Checkpoint",
    "ExplainConfig",
    "Explanation",
    "FeatureSpec",
    "FidelityReport",
    "GradientResult",
    "MetricConfig",
    "ModelConfig",
    "NoteEvent",
    "NumericError",
    "Pitch",
    "RelationType",
    "RestEvent",
    "Score",
    "ScoreGraph",
    "ScoreParseError",
    "TrainConfig",
    "UnsupportedFormatError",
    "ValidationError",
    "backward_target",
    "build_graph",
    "characterization",
    "evaluate",
    "explain",
    "export_mei",
    "fidelity",
    "finite_diff",
    "forward_with_tape",
    "generate_corpus",
    "integrated_gradients",
    "load_annotations",
    "load_checkpoint",
    "onset_pool",
    "oracle_edges",
    "parse_mei",
    "parse_musicxml",
    "predict",
    "save_checkpoint",
    "smote_oversample",
    "synth_corpus",
    "topk_select",
    "train",
    "write_musicxml",
]
