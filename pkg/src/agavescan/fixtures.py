"""Shipped dataset-arithmetic fixtures: the published phase manifests and the
maturity tile counts, used as validation references and demo inputs."""

from __future__ import annotations

import json
from importlib import resources

from .maturity import load_tile_manifest
from .preprocess import SplitManifest


def _read(name: str) -> dict:
    ref = resources.files("agavescan") / "fixtures" / name
    return json.loads(ref.read_text())


def phase_manifest(phase: int) -> SplitManifest:
    """The reference train/val/test manifest for one phase (1..3)."""
    return SplitManifest.from_dict(_read(f"phase{phase}_manifest.json"))


def tile_manifest() -> dict:
    """The reference balanced maturity tile counts."""
    ref = resources.files("agavescan") / "fixtures" / "tiles_manifest.json"
    with resources.as_file(ref) as path:
        return load_tile_manifest(path)
