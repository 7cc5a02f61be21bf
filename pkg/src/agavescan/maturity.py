"""Parcel maturity: 32x32 tile extraction, balanced splits, tile classification,
and parcel-level aggregation by vote mode.

Tiles sit on a 32-stride lattice anchored at the clip origin; a tile is kept
only when its four corner pixel centers and its geometric center fall inside
the parcel polygon (and inside the validity mask), which matches a
full-containment rule on rectangular parcels while staying cheap. Ties in
the parcel vote go to ``young`` so borderline parcels surface for review
instead of silently aging.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import BitMask, InvalidInputError, ParcelLabel, Raster
from .segmenter import (MSG_CLASS, AdapterError, SegmenterConfig,
                        encode_image_frame, make_adapter)
from .segmenter import MSG_TILE as _MSG_TILE

TILE_SIZE = 32
CLASSES = ("young", "mature")


@dataclass(frozen=True)
class TileSample:
    """One 32x32 image tile fully inside a parcel."""

    tile_id: str
    image: Raster
    label: str | None  # None for tiles awaiting classification
    parcel_id: str
    origin: tuple[int, int]  # (col, row) offset within the source clip

    def __post_init__(self):
        if self.image.width != TILE_SIZE or self.image.height != TILE_SIZE:
            raise InvalidInputError("tiles must be exactly 32x32")
        if self.label is not None and self.label not in CLASSES:
            raise InvalidInputError(f"bad tile label {self.label!r}")


@dataclass(frozen=True)
class ParcelVerdict:
    parcel_id: str
    tile_votes: dict
    maturity: str
    tie_broken: bool


@dataclass
class MaturityConfig:
    kind: str = "builtin"
    # builtin statistic: mean 3x3 local variance; young plantations show
    # finer row texture, i.e. higher local variance at this tile size
    variance_cutoff: int = 900
    low_confidence_below: int = 40
    external: dict = None

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise InvalidInputError(f"unknown classifier kind {self.kind!r}")


def extract_tiles(clip: Raster, parcel: ParcelLabel, tile: int = TILE_SIZE,
                  validity: BitMask | None = None) -> "list[TileSample]":
    """Cut the parcel's fully-contained tiles out of a clip."""
    poly = parcel.polygon
    tiles = []
    label = parcel.maturity if parcel.maturity in CLASSES else None
    for r0 in range(0, clip.height - tile + 1, tile):
        for c0 in range(0, clip.width - tile + 1, tile):
            # corner pixel centers plus geometric center, in pixel space
            samples = [
                (c0 + 0.5, r0 + 0.5),
                (c0 + tile - 0.5, r0 + 0.5),
                (c0 + 0.5, r0 + tile - 0.5),
                (c0 + tile - 0.5, r0 + tile - 0.5),
                (c0 + tile / 2.0, r0 + tile / 2.0),
            ]
            ok = True
            for pc, pr in samples:
                x, y = clip.transform.pixel_to_map(pc, pr)
                if not poly.contains_point(x, y):
                    ok = False
                    break
            if ok and validity is not None:
                ok = bool(validity.data[r0:r0 + tile, c0:c0 + tile].all())
            if ok:
                tiles.append(TileSample(
                    tile_id=f"{parcel.id}_{r0 // tile}_{c0 // tile}",
                    image=clip.window(c0, r0, tile, tile),
                    label=label,
                    parcel_id=parcel.id,
                    origin=(c0, r0),
                ))
    return tiles


def balance_split(samples: "list[TileSample]",
                  ratios: "tuple[float, float, float]" = (0.5625, 0.25, 0.1875),
                  seed: int = 0) -> "tuple[list[TileSample], list[TileSample], list[TileSample]]":
    """Split tiles train/val/test with exactly equal class counts per split.

    Parcels never straddle splits (all tiles of a parcel land together) and
    the majority class is down-sampled per split to match the minority.
    """
    by_class: dict[str, list[str]] = {c: [] for c in CLASSES}
    by_parcel: dict[str, list[TileSample]] = {}
    for s in samples:
        if s.label is None:
            raise InvalidInputError(f"tile {s.tile_id} is unlabeled")
        by_parcel.setdefault(s.parcel_id, []).append(s)
    for pid, tiles in by_parcel.items():
        labels = {t.label for t in tiles}
        if len(labels) != 1:
            raise InvalidInputError(f"parcel {pid} has mixed tile labels")
        by_class[tiles[0].label].append(pid)
    if any(not pids for pids in by_class.values()):
        missing = [c for c, p in by_class.items() if not p]
        raise InvalidInputError(f"class absent from input: {missing}")

    total = sum(float(r) for r in ratios)
    fracs = [float(r) / total for r in ratios]
    balanced = min(sum(len(by_parcel[p]) for p in pids) for pids in by_class.values())
    targets = [round(f * balanced) for f in fracs]
    targets[0] += balanced - sum(targets)

    rng = random.Random(seed)
    splits: "list[list[TileSample]]" = [[], [], []]
    for cls in CLASSES:
        pids = sorted(by_class[cls])
        rng.shuffle(pids)
        si = 0
        count = 0
        for pid in pids:
            tiles = sorted(by_parcel[pid], key=lambda t: t.tile_id)
            while si < 2 and count >= targets[si]:
                si += 1
                count = 0
            take = min(len(tiles), targets[si] - count)
            if take > 0:
                splits[si].extend(tiles[:take])  # overflow tiles are dropped
                count += take

    # per-split down-sampling of the majority class
    out = []
    for si, tiles in enumerate(splits):
        per = {c: [t for t in tiles if t.label == c] for c in CLASSES}
        keep = min(len(v) for v in per.values())
        trimmed = []
        for c in CLASSES:
            pool = per[c]
            if len(pool) > keep:
                idx = sorted(rng.sample(range(len(pool)), keep))
                pool = [pool[i] for i in idx]
            trimmed.extend(pool)
        out.append(trimmed)
    return out[0], out[1], out[2]


def _tile_variance_stat(image: Raster) -> int:
    """Mean 3x3 local variance of the grayscale tile, integer fixed-point."""
    px = image.pixels.astype(np.int64)
    if image.bands == 3:
        g = (299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2]) // 1000
    else:
        g = px[:, :, 0]
    p = np.pad(g, 1, mode="edge")
    n = 9
    s1 = sum(p[dr:dr + TILE_SIZE, dc:dc + TILE_SIZE]
             for dr in range(3) for dc in range(3))
    s2 = sum(p[dr:dr + TILE_SIZE, dc:dc + TILE_SIZE] ** 2
             for dr in range(3) for dc in range(3))
    var_nn = n * s2 - s1 * s1  # n^2 * local variance
    return int(var_nn.sum() // (n * n * TILE_SIZE * TILE_SIZE))


def classify_tile(image: Raster, cfg: MaturityConfig | None = None,
                  adapter=None, tile_id: str | None = None) -> "tuple[str, int]":
    """Classify one 32x32 tile; returns (class, confidence 0..255)."""
    cfg = cfg or MaturityConfig()
    if image.width != TILE_SIZE or image.height != TILE_SIZE:
        raise InvalidInputError("classifier expects a 32x32 tile")
    if cfg.kind == "external":
        adapter = adapter or make_adapter(SegmenterConfig(kind="external",
                                                          external=cfg.external))
        msg_type, payload = adapter.request(
            encode_image_frame(image.pixels, _MSG_TILE), tile_id)
        if msg_type != MSG_CLASS:
            raise AdapterError(f"expected class frame, got type {msg_type}", tile_id)
        cls, conf = payload
        return CLASSES[cls % 2], conf
    stat = _tile_variance_stat(image)
    cutoff = cfg.variance_cutoff
    cls = "young" if stat >= cutoff else "mature"
    spread = abs(stat - cutoff)
    confidence = min(255, (spread * 255) // max(cutoff, 1))
    return cls, confidence


def parcel_maturity(votes: "list[str]", parcel_id: str = "") -> ParcelVerdict:
    """Majority class over tile votes; ties resolve to young, flagged."""
    if not votes:
        raise InvalidInputError("cannot aggregate an empty vote list")
    counts = Counter(votes)
    for v in counts:
        if v not in CLASSES:
            raise InvalidInputError(f"bad vote {v!r}")
    young = counts.get("young", 0)
    mature = counts.get("mature", 0)
    tie = young == mature
    maturity = "young" if young >= mature else "mature"
    return ParcelVerdict(parcel_id=parcel_id,
                         tile_votes={"young": young, "mature": mature},
                         maturity=maturity, tie_broken=tie)


# --- on-disk tile dataset ----------------------------------------------------

def write_tile_dataset(root, splits: "dict[str, list[TileSample]]") -> dict:
    """Write tiles/{split}/{class}/{tile_id}.png plus a counts manifest."""
    from .io import write_clip_png

    root = Path(root)
    manifest = {"splits": {}, "total": 0}
    for split, tiles in splits.items():
        counts = {c: 0 for c in CLASSES}
        for t in tiles:
            d = root / split / t.label
            d.mkdir(parents=True, exist_ok=True)
            write_clip_png(d / f"{t.tile_id}.png", t.image.pixels)
            counts[t.label] += 1
        manifest["splits"][split] = {**counts, "total": sum(counts.values())}
        manifest["total"] += sum(counts.values())
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def load_tile_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    for split, counts in manifest["splits"].items():
        expect = sum(counts[c] for c in CLASSES)
        if counts.get("total", expect) != expect:
            raise InvalidInputError(f"split {split}: class counts disagree with total")
    return manifest
