"""File formats: GeoTIFF reading, PNG clips with geotransform sidecars, GeoJSON labels.

GeoTIFF support is read-only and deliberately minimal: pixel data through
Pillow plus the ModelPixelScale/ModelTiepoint/GeoKeyDirectory tags for the
geotransform and CRS. Clips and masks travel as plain PNGs with a JSON
sidecar carrying the transform, which keeps every artifact inspectable with
stock image tools.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, TiffImagePlugin

from .geo import (BitMask, GeoTransform, InvalidInputError, ParcelLabel,
                  Polygon)

# TIFF tag ids used by GeoTIFF
_TAG_PIXEL_SCALE = 33550
_TAG_TIEPOINT = 33922
_TAG_GEO_KEYS = 34735
_KEY_GEOGRAPHIC_CRS = 2048
_KEY_PROJECTED_CRS = 3072


def read_geotiff(path) -> "tuple[np.ndarray, GeoTransform]":
    """Read a GeoTIFF into (pixels HxWxB uint8/uint16, GeoTransform)."""
    with Image.open(path) as img:
        arr = np.asarray(img)
        tags = dict(img.tag_v2) if hasattr(img, "tag_v2") else {}
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.dtype not in (np.uint8, np.uint16):
        raise InvalidInputError(f"unsupported GeoTIFF dtype {arr.dtype} in {path}")

    if _TAG_PIXEL_SCALE not in tags or _TAG_TIEPOINT not in tags:
        raise InvalidInputError(f"{path} lacks GeoTIFF georeferencing tags")
    sx, sy = float(tags[_TAG_PIXEL_SCALE][0]), float(tags[_TAG_PIXEL_SCALE][1])
    tp = [float(v) for v in tags[_TAG_TIEPOINT][:6]]
    i, j, _, x, y, _ = tp
    transform = GeoTransform(
        origin_x=x - i * sx,
        origin_y=y + j * sy,
        pixel_size_x=sx,
        pixel_size_y=-sy,
        crs_id=_crs_from_geokeys(tags.get(_TAG_GEO_KEYS)),
    )
    return arr, transform


def _crs_from_geokeys(keys) -> str:
    if not keys:
        return ""
    vals = list(keys)
    # GeoKeyDirectory: header of 4 shorts, then (key, location, count, value) quads
    for k in range(4, len(vals) - 3, 4):
        key_id, location, _count, value = vals[k:k + 4]
        if key_id in (_KEY_PROJECTED_CRS, _KEY_GEOGRAPHIC_CRS) and location == 0:
            return f"EPSG:{value}"
    return ""


def write_geotiff(path, pixels: np.ndarray, transform: GeoTransform) -> None:
    """Write a (small) GeoTIFF; used for fixtures and round-trip tests."""
    info = TiffImagePlugin.ImageFileDirectory_v2()
    info[_TAG_PIXEL_SCALE] = (transform.pixel_size_x, -transform.pixel_size_y, 0.0)
    info[_TAG_TIEPOINT] = (0.0, 0.0, 0.0, transform.origin_x, transform.origin_y, 0.0)
    info.tagtype[_TAG_PIXEL_SCALE] = TiffImagePlugin.TiffTags.DOUBLE
    info.tagtype[_TAG_TIEPOINT] = TiffImagePlugin.TiffTags.DOUBLE
    if transform.crs_id.upper().startswith("EPSG:"):
        code = int(transform.crs_id.split(":")[1])
        info[_TAG_GEO_KEYS] = (1, 1, 0, 1, _KEY_PROJECTED_CRS, 0, 1, code)
        info.tagtype[_TAG_GEO_KEYS] = TiffImagePlugin.TiffTags.SHORT
    img = Image.fromarray(pixels.squeeze())
    img.save(path, format="TIFF", tiffinfo=info)


def write_clip_png(path, pixels: np.ndarray, transform: GeoTransform | None = None) -> None:
    """Write an 8-bit clip as PNG, plus a .json sidecar with the transform."""
    if pixels.dtype != np.uint8:
        raise InvalidInputError("clips are written as 8-bit PNG; resample first")
    Image.fromarray(pixels.squeeze()).save(path, format="PNG")
    if transform is not None:
        sidecar = Path(path).with_suffix(".json")
        sidecar.write_text(json.dumps(transform.to_dict(), indent=2))


def read_clip_png(path) -> "tuple[np.ndarray, GeoTransform | None]":
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    sidecar = Path(path).with_suffix(".json")
    transform = None
    if sidecar.exists():
        transform = GeoTransform.from_dict(json.loads(sidecar.read_text()))
    return arr, transform


def write_mask_png(path, mask: BitMask) -> None:
    """Persist a BitMask as single-band PNG with values {0, 255}."""
    Image.fromarray(np.where(mask.data, 255, 0).astype(np.uint8)).save(path, format="PNG")


def read_mask_png(path) -> BitMask:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return BitMask(arr >= 128)


def _polygon_to_coords(poly: Polygon) -> list:
    return [[list(pt) for pt in ring] for ring in poly.rings]


def _polygon_from_coords(coords) -> Polygon:
    if not coords:
        raise InvalidInputError("empty polygon coordinates")
    exterior = tuple((float(x), float(y)) for x, y in coords[0])
    holes = tuple(tuple((float(x), float(y)) for x, y in ring) for ring in coords[1:])
    return Polygon(exterior, holes)


def labels_to_geojson(labels: "list[ParcelLabel]", crs_id: str = "") -> dict:
    features = []
    for lab in labels:
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon",
                         "coordinates": _polygon_to_coords(lab.polygon)},
            "properties": {
                "id": lab.id,
                "maturity": lab.maturity,
                "provenance": lab.provenance,
                "phase": lab.phase,
            },
        })
    fc = {"type": "FeatureCollection", "features": features}
    if crs_id:
        fc["crs"] = {"type": "name", "properties": {"name": crs_id}}
    return fc


def labels_from_geojson(fc: dict) -> "list[ParcelLabel]":
    if fc.get("type") != "FeatureCollection":
        raise InvalidInputError("expected a GeoJSON FeatureCollection")
    labels = []
    for i, feat in enumerate(fc.get("features", [])):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") == "Polygon":
            polys = [geom["coordinates"]]
        elif geom.get("type") == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise InvalidInputError(f"feature {i}: unsupported geometry {geom.get('type')!r}")
        for j, coords in enumerate(polys):
            suffix = f"_{j}" if len(polys) > 1 else ""
            labels.append(ParcelLabel(
                id=str(props.get("id", f"feature_{i}")) + suffix,
                polygon=_polygon_from_coords(coords),
                maturity=props.get("maturity", "unknown"),
                provenance=props.get("provenance", "expert"),
                phase=int(props.get("phase", 1)),
            ))
    return labels


def save_labels(path, labels: "list[ParcelLabel]", crs_id: str = "") -> None:
    Path(path).write_text(json.dumps(labels_to_geojson(labels, crs_id), indent=2))


def load_labels(path) -> "list[ParcelLabel]":
    return labels_from_geojson(json.loads(Path(path).read_text()))
