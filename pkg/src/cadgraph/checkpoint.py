"""Model configuration and checkpoint serialization.

A checkpoint is JSON: {format_version, model_config, feature_spec,
tensors: {name: {shape, data}}}. Floats are written in shortest
round-trip decimal form, so save -> load -> save is byte-identical and
tensors survive bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import RelationType

FORMAT_VERSION = 1

N_CLASSES = 4


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 2
    hidden_dim: int = 64
    n_classes: int = N_CLASSES
    activation: str = "relu"
    aggregation: str = "mean"
    norm: str = "l2"
    onset_pool: str = "residual_mean"

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValidationError("hidden_dim must be >= 1")
        if self.n_layers < 1:
            raise ValidationError("n_layers must be >= 1")
        if self.n_classes != N_CLASSES:
            raise ValidationError(f"n_classes must be {N_CLASSES}")
        if self.activation not in ("relu", "identity"):
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.aggregation != "mean":
            raise ValidationError(f"unknown aggregation {self.aggregation!r}")
        if self.norm not in ("l2", "none"):
            raise ValidationError(f"unknown norm {self.norm!r}")
        if self.onset_pool != "residual_mean":
            raise ValidationError(f"unknown onset_pool {self.onset_pool!r}")

    def to_json(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "hidden_dim": self.hidden_dim,
            "n_classes": self.n_classes,
            "activation": self.activation,
            "aggregation": self.aggregation,
            "norm": self.norm,
            "onset_pool": self.onset_pool,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ModelConfig":
        return cls(**payload)


def encoder_weight_name(layer: int, relation: RelationType) -> str:
    return f"encoder.{layer}.{relation.key}.weight"


def expected_shapes(config: ModelConfig, in_dim: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    d = in_dim
    for layer in range(config.n_layers):
        for rel in RelationType:
            shapes[encoder_weight_name(layer, rel)] = (2 * d, config.hidden_dim)
        d = config.hidden_dim
    shapes["mlp.0.weight"] = (config.hidden_dim, config.hidden_dim)
    shapes["mlp.0.bias"] = (config.hidden_dim,)
    shapes["mlp.1.weight"] = (config.hidden_dim, config.n_classes)
    shapes["mlp.1.bias"] = (config.n_classes,)
    return shapes


@dataclass
class Checkpoint:
    model_config: ModelConfig
    feature_spec: str
    tensors: dict[str, np.ndarray]
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.validate()

    @property
    def in_dim(self) -> int:
        return self.tensors[encoder_weight_name(0, RelationType.ONSET)].shape[0] // 2

    def validate(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise ValidationError(
                f"checkpoint format_version {self.format_version} != {FORMAT_VERSION}")
        first = encoder_weight_name(0, RelationType.ONSET)
        if first not in self.tensors:
            raise ValidationError(f"checkpoint missing tensor {first!r}")
        shapes = expected_shapes(self.model_config, self.in_dim)
        for name, shape in shapes.items():
            tensor = self.tensors.get(name)
            if tensor is None:
                raise ValidationError(f"checkpoint missing tensor {name!r}")
            if tensor.shape != shape:
                raise ValidationError(
                    f"tensor {name!r} has shape {tensor.shape}, expected {shape}")
            if not np.all(np.isfinite(tensor)):
                raise ValidationError(f"tensor {name!r} contains non-finite values")
        extra = set(self.tensors) - set(shapes)
        if extra:
            raise ValidationError(f"checkpoint has unexpected tensors: {sorted(extra)}")


def zero_checkpoint(config: ModelConfig, in_dim: int, feature_spec: str = "base-v1") -> Checkpoint:
    tensors = {name: np.zeros(shape) for name, shape in expected_shapes(config, in_dim).items()}
    return Checkpoint(model_config=config, feature_spec=feature_spec, tensors=tensors)


def random_checkpoint(config: ModelConfig, in_dim: int, rng: np.random.Generator,
                      feature_spec: str = "base-v1") -> Checkpoint:
    """Glorot-uniform weights, zero biases."""
    tensors = {}
    for name, shape in expected_shapes(config, in_dim).items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape)
        else:
            limit = float(np.sqrt(6.0 / (shape[0] + shape[1])))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
    return Checkpoint(model_config=config, feature_spec=feature_spec, tensors=tensors)


def save_checkpoint(ckpt: Checkpoint) -> bytes:
    payload = {
        "format_version": ckpt.format_version,
        "model_config": ckpt.model_config.to_json(),
        "feature_spec": ckpt.feature_spec,
        "tensors": {
            name: {"shape": list(t.shape), "data": [float(v) for v in t.reshape(-1)]}
            for name, t in sorted(ckpt.tensors.items())
        },
    }
    return (json.dumps(payload, sort_keys=True) + "\n").encode("utf-8")


def load_checkpoint(data: bytes | str) -> Checkpoint:
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"checkpoint is not valid JSON: {exc}") from exc
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"checkpoint format_version {version} != {FORMAT_VERSION}")
    config = ModelConfig.from_json(payload["model_config"])
    tensors = {}
    for name, entry in payload["tensors"].items():
        shape = tuple(entry["shape"])
        data_list = entry["data"]
        expected = int(np.prod(shape)) if shape else 1
        if len(data_list) != expected:
            raise ValidationError(
                f"tensor {name!r}: data length {len(data_list)} does not match shape {shape}")
        arr = np.array(data_list, dtype=np.float64).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"tensor {name!r} contains non-finite values")
        tensors[name] = arr
    return Checkpoint(
        model_config=config,
        feature_spec=payload.get("feature_spec", "base-v1"),
        tensors=tensors,
        format_version=version,
    )


def checkpoint_hash(ckpt: Checkpoint) -> str:
    return hashlib.sha256(save_checkpoint(ckpt)).hexdigest()[:16]
