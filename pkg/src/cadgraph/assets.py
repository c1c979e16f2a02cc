"""Bundled data: the toy checkpoint and the example pieces."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .checkpoint import Checkpoint, load_checkpoint


def _root():
    return resources.files(__package__) / "assets"


def toy_checkpoint() -> Checkpoint:
    return load_checkpoint(asset_bytes("toy_checkpoint.json"))


def asset_bytes(name: str) -> bytes:
    return (_root() / name).read_bytes()


def piece_names() -> list[str]:
    pieces = _root() / "pieces"
    return sorted({Path(p.name).stem.replace(".cadences", "")
                   for p in pieces.iterdir() if p.name.endswith(".musicxml")})


def piece_bytes(name: str, kind: str = "musicxml") -> bytes:
    suffix = {"musicxml": ".musicxml", "mei": ".mei", "annotations": ".cadences.json"}[kind]
    return (_root() / "pieces" / f"{name}{suffix}").read_bytes()
