"""Scene preparation: 8-bit resampling, 256x256 chipping, splits, augmentation.

A grid cell's raster and label mask are cut into fixed-size clips on a
regular stride lattice; the final row/column window is shifted back so it
ends exactly at the raster edge (overlapping its neighbor) so every pixel is
covered and all clips share one size. Train/val/test assignment happens at
the grid-cell level so test cells never leak clips into training.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geo import BitMask, GeoTransform, InvalidInputError, Raster, mask_area_px

CLIP_SIZE = 256
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ClipPair:
    """One image clip with its label mask and a validity (real-data) mask."""

    clip_id: str
    image: Raster
    mask: BitMask
    validity: BitMask
    source_cell: str
    padded: bool = False
    provenance: str = "real"

    def __post_init__(self):
        shp = (self.image.height, self.image.width)
        if self.mask.data.shape != shp or self.validity.data.shape != shp:
            raise InvalidInputError("image, mask and validity dimensions differ")
        if bool((self.mask.data & ~self.validity.data).any()):
            raise InvalidInputError("label pixels present outside valid data")


@dataclass
class SplitManifest:
    """Versioned train/val/test assignment of clips for one phase."""

    phase: int
    entries: list[dict] = field(default_factory=list)  # {"clip_id", "split", ["provenance"]}

    def __post_init__(self):
        if not 1 <= self.phase <= 3:
            raise InvalidInputError(f"phase must be 1..3, got {self.phase}")
        seen: dict[str, str] = {}
        cell_splits: dict[str, set] = {}
        for e in self.entries:
            cid, split = e["clip_id"], e["split"]
            if split not in SPLITS:
                raise InvalidInputError(f"bad split {split!r} for clip {cid}")
            if cid in seen:
                raise InvalidInputError(f"clip {cid} assigned to multiple splits")
            seen[cid] = split
            cell_splits.setdefault(clip_cell_id(cid), set()).add(split)
        for cell, splits in cell_splits.items():
            if "test" in splits and splits & {"train", "val"}:
                raise InvalidInputError(
                    f"cell {cell} has both test and train/val clips")

    @property
    def counts(self) -> dict:
        c = {s: 0 for s in SPLITS}
        for e in self.entries:
            c[e["split"]] += 1
        return c

    @property
    def total(self) -> int:
        return len(self.entries)

    def clip_ids(self, split: str | None = None) -> list[str]:
        return [e["clip_id"] for e in self.entries
                if split is None or e["split"] == split]

    def to_dict(self) -> dict:
        return {"phase": self.phase, "entries": self.entries, "counts": self.counts}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitManifest":
        m = cls(phase=int(d["phase"]), entries=list(d["entries"]))
        stored = d.get("counts")
        if stored is not None and {k: stored[k] for k in SPLITS} != m.counts:
            raise InvalidInputError("manifest counts disagree with entries")
        return m

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "SplitManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def clip_cell_id(clip_id: str) -> str:
    """Cell a clip came from; clip ids are '{cell}_{row}_{col}' (plus suffixes)."""
    return clip_id.split("_")[0]


def resample_to_u8(raster: Raster, validity: BitMask | None = None) -> Raster:
    """Linear per-band stretch from the [p2, p98] percentiles to [0, 255].

    uint8 input passes through unchanged; a constant band maps to zero.
    """
    if raster.dtype == np.uint8:
        return raster
    valid = validity.data if validity is not None else np.ones(
        (raster.height, raster.width), dtype=bool)
    if not valid.any():
        raise InvalidInputError("no valid pixels to stretch")
    out = np.zeros((raster.height, raster.width, raster.bands), dtype=np.uint8)
    for b in range(raster.bands):
        band = raster.pixels[:, :, b].astype(np.float64)
        lo, hi = np.percentile(band[valid], [2.0, 98.0])
        if hi <= lo:
            continue  # degenerate stretch -> all zero
        stretched = np.clip((band - lo) * 255.0 / (hi - lo), 0.0, 255.0)
        out[:, :, b] = np.rint(stretched).astype(np.uint8)
    return Raster(out, raster.transform)


def _window_starts(dim: int, size: int) -> list[int]:
    if dim <= size:
        return [0]
    starts = list(range(0, dim - size + 1, size))
    if starts[-1] + size < dim:
        starts.append(dim - size)  # edge-aligned final window, overlaps neighbor
    return starts


def clip_cell(cell_raster: Raster, cell_mask: BitMask, cell_id: str,
              clip_size: int = CLIP_SIZE,
              validity: BitMask | None = None) -> "list[ClipPair]":
    """Cut a cell into clip_size x clip_size image/mask pairs.

    A raster smaller than clip_size in either dimension yields padded clips
    with the padding marked invalid and ``padded=True``.
    """
    h, w = cell_raster.height, cell_raster.width
    if cell_mask.data.shape != (h, w):
        raise InvalidInputError("raster and mask dimensions differ")
    valid = validity.data if validity is not None else np.ones((h, w), dtype=bool)
    clips = []
    row_starts = _window_starts(h, clip_size)
    col_starts = _window_starts(w, clip_size)
    for ri, r0 in enumerate(row_starts):
        for ci, c0 in enumerate(col_starts):
            ph = min(clip_size, h - r0)
            pw = min(clip_size, w - c0)
            padded = ph < clip_size or pw < clip_size
            img = np.zeros((clip_size, clip_size, cell_raster.bands),
                           dtype=cell_raster.dtype)
            msk = np.zeros((clip_size, clip_size), dtype=bool)
            vld = np.zeros((clip_size, clip_size), dtype=bool)
            img[:ph, :pw] = cell_raster.pixels[r0:r0 + ph, c0:c0 + pw]
            msk[:ph, :pw] = cell_mask.data[r0:r0 + ph, c0:c0 + pw]
            vld[:ph, :pw] = valid[r0:r0 + ph, c0:c0 + pw]
            msk &= vld  # no labels on nodata
            clips.append(ClipPair(
                clip_id=f"{cell_id}_{ri}_{ci}",
                image=Raster(img, cell_raster.transform.shifted(c0, r0)),
                mask=BitMask(msk),
                validity=BitMask(vld),
                source_cell=cell_id,
                padded=padded,
            ))
    return clips


def build_split(clips: "list[ClipPair]", assignment: "dict[str, str]",
                phase: int = 1) -> SplitManifest:
    """Assign clips to splits by their source cell's assignment."""
    entries = []
    for clip in clips:
        if clip.source_cell not in assignment:
            raise InvalidInputError(f"cell {clip.source_cell} has no split assignment")
        entries.append({
            "clip_id": clip.clip_id,
            "split": assignment[clip.source_cell],
            "provenance": clip.provenance,
        })
    return SplitManifest(phase=phase, entries=entries)


# the 8 symmetries of the square, as (rot90 quarter-turns, flip left-right)
DIHEDRAL_OPS: "list[tuple[int, bool]]" = [
    (0, False), (1, False), (2, False), (3, False),
    (0, True), (2, True), (1, True), (3, True),
]


def _apply_dihedral(arr: np.ndarray, op: "tuple[int, bool]") -> np.ndarray:
    k, flip = op
    out = arr
    if flip:
        out = np.flip(out, axis=1)
    if k:
        out = np.rot90(out, k=k, axes=(0, 1))
    return np.ascontiguousarray(out)


def _transform_pair(pair: ClipPair, op: "tuple[int, bool]", idx: int) -> ClipPair:
    if op == (0, False):
        return pair
    return ClipPair(
        clip_id=f"{pair.clip_id}_aug{idx}",
        image=Raster(_apply_dihedral(pair.image.pixels, op), pair.image.transform),
        mask=BitMask(_apply_dihedral(pair.mask.data, op)),
        validity=BitMask(_apply_dihedral(pair.validity.data, op)),
        source_cell=pair.source_cell,
        padded=pair.padded,
        provenance=pair.provenance,
    )


def augment(pair: ClipPair, mode: str = "exhaustive",
            seed: int | None = None) -> "list[ClipPair]":
    """Dihedral-group augmentation, image and mask transformed jointly.

    ``exhaustive`` returns all 8 variants (identity first); ``seeded-random``
    returns a single reproducible variant.
    """
    if pair.image.width != pair.image.height:
        raise InvalidInputError("augmentation requires a square clip")
    if mode == "exhaustive":
        return [_transform_pair(pair, op, i) for i, op in enumerate(DIHEDRAL_OPS)]
    if mode == "seeded-random":
        idx = random.Random(seed).randrange(len(DIHEDRAL_OPS))
        return [_transform_pair(pair, DIHEDRAL_OPS[idx], idx)]
    raise InvalidInputError(f"unknown augmentation mode {mode!r}")


def save_clip_pair(root, pair: ClipPair) -> None:
    """Standard on-disk layout: clips/{id}.png (+sidecar), masks/{id}.png,
    validity/{id}.png only when some pixels are nodata."""
    from . import io as aio

    root = Path(root)
    (root / "clips").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    aio.write_clip_png(root / "clips" / f"{pair.clip_id}.png",
                       pair.image.pixels, pair.image.transform)
    aio.write_mask_png(root / "masks" / f"{pair.clip_id}.png", pair.mask)
    if not pair.validity.data.all():
        (root / "validity").mkdir(parents=True, exist_ok=True)
        aio.write_mask_png(root / "validity" / f"{pair.clip_id}.png", pair.validity)


def load_clip_pair(root, clip_id: str, provenance: str = "real") -> ClipPair:
    from . import io as aio

    root = Path(root)
    pixels, transform = aio.read_clip_png(root / "clips" / f"{clip_id}.png")
    if transform is None:
        raise InvalidInputError(f"clip {clip_id} has no geotransform sidecar")
    mask_path = root / "masks" / f"{clip_id}.png"
    h, w = pixels.shape[:2]
    mask = aio.read_mask_png(mask_path) if mask_path.exists() else BitMask.zeros(w, h)
    vpath = root / "validity" / f"{clip_id}.png"
    validity = aio.read_mask_png(vpath) if vpath.exists() else BitMask.ones(w, h)
    return ClipPair(clip_id=clip_id, image=Raster(pixels, transform), mask=mask,
                    validity=validity, source_cell=clip_cell_id(clip_id),
                    padded=not validity.data.all(), provenance=provenance)


def list_clip_ids(root) -> "list[str]":
    clips_dir = Path(root) / "clips"
    if not clips_dir.exists():
        return []
    return sorted(p.stem for p in clips_dir.glob("*.png"))


def clip_coverage_ok(cell_raster: Raster, clips: "list[ClipPair]",
                     clip_size: int = CLIP_SIZE) -> bool:
    """Every pixel of the cell covered by at least one clip window."""
    h, w = cell_raster.height, cell_raster.width
    covered = np.zeros((h, w), dtype=bool)
    for ri, r0 in enumerate(_window_starts(h, clip_size)):
        for ci, c0 in enumerate(_window_starts(w, clip_size)):
            covered[r0:r0 + clip_size, c0:c0 + clip_size] = True
    return bool(covered.all()) and len(clips) == (
        len(_window_starts(h, clip_size)) * len(_window_starts(w, clip_size)))
