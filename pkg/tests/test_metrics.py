import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agavescan.geo import BitMask, InvalidInputError
from agavescan.metrics import (ClassificationMetrics, ConfusionCounts,
                               SegScore, aggregate, classification_metrics,
                               evaluation_report, object_match, report_table,
                               seg_score)

from conftest import random_mask, strip_mask


def oracle_seg_score(pred, truth):
    """Set-based reference implementation built on python sets of pixels."""
    p = {(r, c) for r, c in zip(*np.nonzero(pred.data))}
    t = {(r, c) for r, c in zip(*np.nonzero(truth.data))}
    if not p and not t:
        return 1.0, 1.0
    inter = len(p & t)
    return inter / len(p | t), 2 * inter / (len(p) + len(t))


def test_seg_score_hand_example():
    pred = BitMask(np.array([[1, 1], [0, 0]], dtype=bool))
    truth = BitMask(np.array([[1, 0], [1, 0]], dtype=bool))
    s = seg_score(pred, truth)
    assert s.iou == pytest.approx(1 / 3, abs=1e-15)
    assert s.dsi == pytest.approx(0.5, abs=1e-15)
    assert s.dcl == pytest.approx(0.5, abs=1e-15)


def test_seg_score_both_empty_is_perfect():
    s = seg_score(BitMask.zeros(4, 4), BitMask.zeros(4, 4))
    assert (s.iou, s.dsi) == (1.0, 1.0)


def test_seg_score_one_empty_is_zero():
    s = seg_score(BitMask.ones(4, 4), BitMask.zeros(4, 4))
    assert (s.iou, s.dsi) == (0.0, 0.0)


def test_seg_score_identical_masks():
    rng = np.random.default_rng(9)
    m = random_mask(rng, 13, 11)
    s = seg_score(m, m)
    assert (s.iou, s.dsi) == (1.0, 1.0)


def test_seg_score_validity_excludes_pixels():
    pred = BitMask(np.array([[1, 1], [1, 1]], dtype=bool))
    truth = BitMask(np.array([[1, 1], [0, 0]], dtype=bool))
    valid = BitMask(np.array([[1, 1], [0, 0]], dtype=bool))
    s = seg_score(pred, truth, valid)
    assert (s.iou, s.dsi) == (1.0, 1.0)


def test_seg_score_shape_mismatch():
    with pytest.raises(InvalidInputError):
        seg_score(BitMask.zeros(2, 2), BitMask.zeros(3, 3))


def test_seg_score_against_oracle_random():
    rng = np.random.default_rng(21)
    for _ in range(200):
        h, w = rng.integers(1, 40, size=2)
        pred = random_mask(rng, w, h, p=rng.uniform(0, 1))
        truth = random_mask(rng, w, h, p=rng.uniform(0, 1))
        s = seg_score(pred, truth)
        iou, dsi = oracle_seg_score(pred, truth)
        assert s.iou == pytest.approx(iou, abs=1e-12)
        assert s.dsi == pytest.approx(dsi, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_dsi_iou_identity(seed):
    rng = np.random.default_rng(seed)
    pred = random_mask(rng, 16, 16)
    truth = random_mask(rng, 16, 16)
    s = seg_score(pred, truth)
    assert s.dsi == pytest.approx(2 * s.iou / (1 + s.iou), abs=1e-12)
    assert 0.0 <= s.iou <= s.dsi <= 1.0


def test_classification_metrics_values():
    m = classification_metrics(ConfusionCounts(tp=97, tn=96, fp=4, fn=3))
    assert m.accuracy == pytest.approx(193 / 200)
    assert m.sensitivity == pytest.approx(0.97)
    assert m.specificity == pytest.approx(0.96)


def test_classification_metrics_undefined_rates():
    m = classification_metrics(ConfusionCounts(tp=0, tn=5, fp=5, fn=0))
    assert m.sensitivity is None
    assert m.specificity == 0.5
    m = classification_metrics(ConfusionCounts(tp=5, tn=0, fp=0, fn=5))
    assert m.specificity is None
    with pytest.raises(InvalidInputError):
        classification_metrics(ConfusionCounts())
    with pytest.raises(InvalidInputError):
        ConfusionCounts(tp=-1)


def test_object_match_threshold_boundary():
    # IoU exactly 0.4: truth cols 0..6 vs pred cols 3..9 (inter 4, union 10)
    truth = [strip_mask(12, 1, 0, 7)]
    below = [strip_mask(12, 1, 3, 10)]
    c = object_match(below, truth)
    assert (c.tp, c.fp, c.fn) == (0, 1, 1)
    # IoU 0.75 >= 0.5: truth cols 0..6 vs pred cols 1..7
    above = [strip_mask(12, 1, 1, 8)]
    c = object_match(above, truth)
    assert (c.tp, c.fp, c.fn) == (1, 0, 0)


def test_object_match_one_to_one():
    # one prediction overlapping two truths may satisfy at most one
    truth = [strip_mask(12, 1, 0, 4), strip_mask(12, 1, 6, 10)]
    pred = [strip_mask(12, 1, 0, 5)]
    c = object_match(pred, truth)
    assert (c.tp, c.fp, c.fn) == (1, 0, 1)
    assert c.tn == 0


def test_object_match_empty_lists():
    c = object_match([], [])
    assert (c.tp, c.fp, c.fn) == (0, 0, 0)
    c = object_match([strip_mask(4, 1, 0, 2)], [])
    assert (c.tp, c.fp, c.fn) == (0, 1, 0)


def test_object_match_greedy_prefers_best_iou():
    truth = [strip_mask(20, 1, 0, 10)]
    good = strip_mask(20, 1, 0, 10)
    ok = strip_mask(20, 1, 0, 12)
    c = object_match([ok, good], truth)
    assert (c.tp, c.fp, c.fn) == (1, 1, 0)


def test_aggregate_unweighted_and_weighted():
    scores = [SegScore(0.2, 1 / 3), SegScore(1.0, 1.0)]
    mean = aggregate(scores)
    assert mean.iou == pytest.approx(0.6)
    weighted = aggregate(scores, weights=[3, 1])
    assert weighted.iou == pytest.approx(0.4)
    with pytest.raises(InvalidInputError):
        aggregate([])
    with pytest.raises(InvalidInputError):
        aggregate(scores, weights=[1])
    with pytest.raises(InvalidInputError):
        aggregate(scores, weights=[0, 0])


def test_evaluation_report_structure():
    rep = evaluation_report({"b": SegScore(1.0, 1.0), "a": SegScore(0.5, 2 / 3)},
                            pooled=SegScore(0.7, 0.8),
                            objects=ConfusionCounts(tp=2, fp=1, fn=0))
    assert [row["clip_id"] for row in rep["clips"]] == ["a", "b"]
    assert rep["aggregate"]["mean_iou"] == pytest.approx(0.75)
    assert rep["aggregate"]["pooled_iou"] == pytest.approx(0.7)
    assert rep["aggregate"]["object"] == {"tp": 2, "fp": 1, "fn": 0}
    text = report_table(rep)
    assert "mean" in text and "objects: tp=2 fp=1 fn=0" in text
