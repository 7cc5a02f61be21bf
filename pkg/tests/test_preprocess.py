import numpy as np
import pytest

from agavescan.geo import BitMask, InvalidInputError, Raster
from agavescan.preprocess import (CLIP_SIZE, DIHEDRAL_OPS, ClipPair,
                                  SplitManifest, _window_starts, augment,
                                  build_split, clip_cell, clip_cell_id,
                                  clip_coverage_ok, list_clip_ids,
                                  load_clip_pair, resample_to_u8,
                                  save_clip_pair)

from conftest import random_mask


def make_pair(rng, tf, size=32, clip_id="c7_0_0"):
    img = Raster(rng.integers(0, 256, (size, size, 3), dtype=np.uint8), tf)
    mask = random_mask(rng, size, size, p=0.3)
    return ClipPair(clip_id=clip_id, image=img, mask=mask,
                    validity=BitMask.ones(size, size), source_cell="c7")


# --- resampling -------------------------------------------------------------

def test_resample_u8_passthrough(tf):
    rng = np.random.default_rng(0)
    r = Raster(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8), tf)
    assert resample_to_u8(r) is r


def test_resample_stretch_hits_full_range(tf):
    band = np.linspace(1000, 9000, 64 * 64).reshape(64, 64).astype(np.uint16)
    out = resample_to_u8(Raster(band[:, :, None], tf))
    assert out.dtype == np.uint8
    assert out.pixels.min() == 0 and out.pixels.max() == 255
    # values below the 2nd percentile clip to 0, above the 98th to 255
    flat = out.pixels[:, :, 0].flatten()
    assert (flat[np.argsort(band.flatten())][:40] == 0).all()


def test_resample_monotone(tf):
    rng = np.random.default_rng(4)
    band = rng.integers(0, 10000, (32, 32), dtype=np.uint16)
    out = resample_to_u8(Raster(band[:, :, None], tf)).pixels[:, :, 0]
    a = band.flatten().astype(int)
    b = out.flatten().astype(int)
    order = np.argsort(a, kind="stable")
    assert (np.diff(b[order]) >= 0).all()


def test_resample_constant_band_is_zero(tf):
    r = Raster(np.full((8, 8, 1), 777, dtype=np.uint16), tf)
    assert (resample_to_u8(r).pixels == 0).all()


def test_resample_respects_validity(tf):
    band = np.zeros((8, 8), dtype=np.uint16)
    band[:, :4] = 100
    band[:, 4:] = 60000  # nodata-ish outliers
    valid = np.zeros((8, 8), dtype=bool)
    valid[:, :4] = True
    out = resample_to_u8(Raster(band[:, :, None], tf), BitMask(valid))
    # stretch statistics come only from valid pixels -> constant -> zero
    assert (out.pixels[:, :4] == 0).all()
    with pytest.raises(InvalidInputError):
        resample_to_u8(Raster(band[:, :, None], tf), BitMask.zeros(8, 8))


# --- window lattice / chipping ------------------------------------------------

def test_window_starts_exact_multiple():
    assert _window_starts(512, 256) == [0, 256]


def test_window_starts_edge_aligned_overlap():
    # 600 px: third window shifts back to column 344 (120 px overlap)
    assert _window_starts(600, 256) == [0, 256, 344]


def test_window_starts_small_dim():
    assert _window_starts(100, 256) == [0]


def test_window_starts_scene_scale():
    starts = _window_starts(5000, 256)
    assert len(starts) == 20
    assert starts[-1] == 5000 - 256


def test_clip_cell_geometry_and_coverage(tf):
    rng = np.random.default_rng(1)
    raster = Raster(rng.integers(0, 256, (600, 300, 3), dtype=np.uint8), tf)
    mask = random_mask(rng, 300, 600, p=0.2)
    clips = clip_cell(raster, mask, "c3")
    assert len(clips) == 3 * 2
    assert {c.clip_id for c in clips} == {f"c3_{r}_{c}" for r in range(3)
                                          for c in range(2)}
    assert all(c.image.width == CLIP_SIZE and c.image.height == CLIP_SIZE
               for c in clips)
    assert clip_coverage_ok(raster, clips)
    # reassembled pixels match the source (last window overlaps consistently)
    last = [c for c in clips if c.clip_id == "c3_2_1"][0]
    assert np.array_equal(last.image.pixels, raster.pixels[344:600, 44:300])
    assert last.image.transform.origin_x == tf.pixel_to_map(44, 344)[0]


def test_clip_cell_padding(tf):
    rng = np.random.default_rng(2)
    raster = Raster(rng.integers(0, 256, (100, 100, 3), dtype=np.uint8), tf)
    clips = clip_cell(raster, BitMask.zeros(100, 100), "c9")
    assert len(clips) == 1 and clips[0].padded
    v = clips[0].validity.data
    assert v[:100, :100].all() and not v[100:].any() and not v[:, 100:].any()


def test_clip_pair_rejects_labels_on_nodata(tf):
    img = Raster(np.zeros((8, 8, 3), dtype=np.uint8), tf)
    mask = BitMask.ones(8, 8)
    with pytest.raises(InvalidInputError):
        ClipPair("x_0_0", img, mask, BitMask.zeros(8, 8), "x")


# --- split manifests ----------------------------------------------------------

def test_manifest_counts_and_round_trip(tmp_path):
    m = SplitManifest(phase=1, entries=[
        {"clip_id": "a_0_0", "split": "train"},
        {"clip_id": "a_0_1", "split": "train"},
        {"clip_id": "b_0_0", "split": "val"},
        {"clip_id": "c_0_0", "split": "test"},
    ])
    assert m.counts == {"train": 2, "val": 1, "test": 1}
    assert m.total == 4
    assert m.clip_ids("train") == ["a_0_0", "a_0_1"]
    path = tmp_path / "manifest.json"
    m.save(path)
    assert SplitManifest.load(path).counts == m.counts


def test_manifest_rejects_duplicates_and_leaks():
    with pytest.raises(InvalidInputError):
        SplitManifest(phase=1, entries=[
            {"clip_id": "a_0_0", "split": "train"},
            {"clip_id": "a_0_0", "split": "val"},
        ])
    # a test cell must not also contribute train clips
    with pytest.raises(InvalidInputError):
        SplitManifest(phase=1, entries=[
            {"clip_id": "a_0_0", "split": "test"},
            {"clip_id": "a_0_1", "split": "train"},
        ])
    with pytest.raises(InvalidInputError):
        SplitManifest(phase=0)
    with pytest.raises(InvalidInputError):
        SplitManifest(phase=1, entries=[{"clip_id": "a_0_0", "split": "dev"}])


def test_manifest_stored_count_check():
    d = {"phase": 1, "entries": [{"clip_id": "a_0_0", "split": "train"}],
         "counts": {"train": 5, "val": 0, "test": 0}}
    with pytest.raises(InvalidInputError):
        SplitManifest.from_dict(d)


def test_build_split_uses_cell_assignment(tf):
    rng = np.random.default_rng(6)
    clips = [make_pair(rng, tf, clip_id=f"c7_0_{i}") for i in range(3)]
    m = build_split(clips, {"c7": "val"})
    assert m.counts == {"train": 0, "val": 3, "test": 0}
    with pytest.raises(InvalidInputError):
        build_split(clips, {"other": "train"})


def test_clip_cell_id():
    assert clip_cell_id("c17_2_3") == "c17"
    assert clip_cell_id("c17_2_3_aug5") == "c17"


# --- augmentation ---------------------------------------------------------------

def test_augment_exhaustive_unique_and_joint(tf):
    rng = np.random.default_rng(8)
    pair = make_pair(rng, tf)
    variants = augment(pair, "exhaustive")
    assert len(variants) == 8
    assert variants[0] is pair
    imgs = {v.image.pixels.tobytes() for v in variants}
    assert len(imgs) == 8  # asymmetric content -> all 8 variants distinct
    # mask moves with the image: a probe pixel stays aligned
    probe = np.zeros((32, 32), dtype=bool)
    probe[3, 5] = True
    ref = ClipPair("c7_0_0", pair.image, BitMask(probe),
                   BitMask.ones(32, 32), "c7")
    for v in augment(ref, "exhaustive"):
        r, c = np.argwhere(v.mask.data)[0]
        src = np.argwhere(pair.image.pixels[3, 5][None, None, :] ==
                          v.image.pixels[r, c][None, None, :])
        assert (v.image.pixels[r, c] == pair.image.pixels[3, 5]).all()


def test_augment_mask_area_invariant(tf):
    rng = np.random.default_rng(10)
    pair = make_pair(rng, tf)
    area = int(pair.mask.data.sum())
    for v in augment(pair, "exhaustive"):
        assert int(v.mask.data.sum()) == area


def test_augment_seeded_random_reproducible(tf):
    rng = np.random.default_rng(11)
    pair = make_pair(rng, tf)
    a = augment(pair, "seeded-random", seed=123)
    b = augment(pair, "seeded-random", seed=123)
    assert len(a) == 1
    assert np.array_equal(a[0].image.pixels, b[0].image.pixels)
    assert a[0].clip_id == b[0].clip_id


def test_augment_rejects_non_square(tf):
    img = Raster(np.zeros((8, 16, 3), dtype=np.uint8), tf)
    pair = ClipPair("x_0_0", img, BitMask.zeros(16, 8), BitMask.ones(16, 8), "x")
    with pytest.raises(InvalidInputError):
        augment(pair, "exhaustive")
    with pytest.raises(InvalidInputError):
        augment(make_pair(np.random.default_rng(0), img.transform), "shuffle")


def test_dihedral_ops_form_the_full_group():
    assert len(set(DIHEDRAL_OPS)) == 8


# --- on-disk layout ------------------------------------------------------------

def test_save_load_clip_pair_round_trip(tmp_path, tf):
    rng = np.random.default_rng(12)
    pair = make_pair(rng, tf)
    save_clip_pair(tmp_path, pair)
    got = load_clip_pair(tmp_path, "c7_0_0")
    assert np.array_equal(got.image.pixels, pair.image.pixels)
    assert got.mask == pair.mask
    assert got.image.transform == tf
    assert not (tmp_path / "validity").exists()  # fully valid clip
    assert list_clip_ids(tmp_path) == ["c7_0_0"]


def test_save_load_clip_pair_with_nodata(tmp_path, tf):
    img = Raster(np.zeros((16, 16, 3), dtype=np.uint8), tf)
    valid = np.zeros((16, 16), dtype=bool)
    valid[:8] = True
    pair = ClipPair("c8_0_0", img, BitMask.zeros(16, 16), BitMask(valid),
                    "c8", padded=True)
    save_clip_pair(tmp_path, pair)
    got = load_clip_pair(tmp_path, "c8_0_0")
    assert got.validity == pair.validity
    assert got.padded
