import json

import numpy as np
import pytest

from agavescan import io as aio
from agavescan.geo import BitMask, GeoTransform, ParcelLabel, Polygon

from conftest import rect_polygon


def test_geotiff_round_trip(tmp_path, tf):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 65535, (40, 30), dtype=np.uint16)
    path = tmp_path / "scene.tif"
    aio.write_geotiff(path, pixels, tf)
    got, transform = aio.read_geotiff(path)
    assert np.array_equal(got[:, :, 0], pixels)
    assert transform == tf


def test_geotiff_missing_tags(tmp_path):
    from PIL import Image

    path = tmp_path / "plain.tif"
    Image.fromarray(np.zeros((4, 4), np.uint8)).save(path)
    with pytest.raises(Exception):
        aio.read_geotiff(path)


def test_clip_png_sidecar(tmp_path, tf):
    rng = np.random.default_rng(1)
    pixels = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    path = tmp_path / "clip.png"
    aio.write_clip_png(path, pixels, tf)
    got, transform = aio.read_clip_png(path)
    assert np.array_equal(got, pixels)
    assert transform == tf
    sidecar = json.loads((tmp_path / "clip.json").read_text())
    assert sidecar["pixel_size_x"] == 0.5


def test_mask_png_values(tmp_path):
    m = BitMask(np.array([[1, 0], [0, 1]], dtype=bool))
    path = tmp_path / "mask.png"
    aio.write_mask_png(path, m)
    from PIL import Image

    raw = np.asarray(Image.open(path))
    assert set(raw.flatten().tolist()) == {0, 255}
    assert aio.read_mask_png(path) == m


def test_geojson_round_trip(tmp_path, tf):
    labels = [
        ParcelLabel("p1", rect_polygon(tf, 0, 0, 10, 10), "young", "expert", 1),
        ParcelLabel("p2", rect_polygon(tf, 20, 20, 40, 44), "mature",
                    "model_approved", 2),
    ]
    path = tmp_path / "labels.geojson"
    aio.save_labels(path, labels, crs_id=tf.crs_id)
    got = aio.load_labels(path)
    assert [l.id for l in got] == ["p1", "p2"]
    assert got[0].maturity == "young"
    assert got[1].provenance == "model_approved"
    assert got[0].polygon == labels[0].polygon


def test_geojson_carries_properties(tf):
    fc = aio.labels_to_geojson(
        [ParcelLabel("x", rect_polygon(tf, 0, 0, 2, 2), "unknown",
                     "model_proposed", 2)])
    props = fc["features"][0]["properties"]
    assert props == {"id": "x", "maturity": "unknown",
                     "provenance": "model_proposed", "phase": 2}
