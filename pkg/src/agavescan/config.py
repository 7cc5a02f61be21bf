"""Declarative pipeline configuration: TOML file with CLI flag overrides."""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geo import InvalidInputError
from .maturity import MaturityConfig
from .segmenter import SegmenterConfig


@dataclass
class PipelineConfig:
    scene: str = ""
    labels: str = ""
    workdir: str = "."
    cell_km: float = 2.5
    clip_size: int = 256
    tile_size: int = 32
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    maturity: MaturityConfig = field(default_factory=MaturityConfig)
    host: str = "127.0.0.1"
    port: int = 8787

    def __post_init__(self):
        if self.cell_km <= 0 or self.clip_size <= 0 or self.tile_size <= 0:
            raise InvalidInputError("sizes must be positive")
        if self.clip_size % self.tile_size != 0:
            raise InvalidInputError("clip_size must be divisible by tile_size")
        override = os.environ.get("AGAVESCAN_WORKDIR")
        if override:
            self.workdir = override

    def workdir_path(self) -> Path:
        return Path(self.workdir)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise InvalidInputError(f"cannot serialize config value {v!r}")


def to_toml(cfg: PipelineConfig) -> str:
    seg = asdict(cfg.segmenter)
    mat = asdict(cfg.maturity)
    sections = {
        "paths": {"scene": cfg.scene, "labels": cfg.labels, "workdir": cfg.workdir},
        "grid": {"cell_km": cfg.cell_km},
        "clip": {"size": cfg.clip_size},
        "tile": {"size": cfg.tile_size},
        "segmenter": {k: v for k, v in seg.items() if k != "external"},
        "segmenter.external": cfg.segmenter.external or {},
        "maturity": {k: v for k, v in mat.items() if k != "external" and v is not None},
        "maturity.external": cfg.maturity.external or {},
        "service": {"host": cfg.host, "port": cfg.port},
    }
    lines = []
    for name, table in sections.items():
        if not table and "." in name:
            continue
        lines.append(f"[{name}]")
        for k, v in table.items():
            lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")
    return "\n".join(lines)


def from_toml(text: str) -> PipelineConfig:
    data = tomllib.loads(text)
    paths = data.get("paths", {})
    seg = dict(data.get("segmenter", {}))
    seg_external = seg.pop("external", {})
    mat = dict(data.get("maturity", {}))
    mat_external = mat.pop("external", {})
    service = data.get("service", {})
    return PipelineConfig(
        scene=paths.get("scene", ""),
        labels=paths.get("labels", ""),
        workdir=paths.get("workdir", "."),
        cell_km=data.get("grid", {}).get("cell_km", 2.5),
        clip_size=data.get("clip", {}).get("size", 256),
        tile_size=data.get("tile", {}).get("size", 32),
        segmenter=SegmenterConfig(external=seg_external or {}, **seg),
        maturity=MaturityConfig(external=mat_external or None, **mat),
        host=service.get("host", "127.0.0.1"),
        port=service.get("port", 8787),
    )


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return from_toml(Path(path).read_text())
