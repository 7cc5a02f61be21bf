"""Segmentation and classification evaluation.

Pixel scores follow the exact set definitions (no smoothing epsilon):
DSI = 2|X∩Y| / (|X|+|Y|), IoU = |X∩Y| / |X∪Y|, DCL = 1 - DSI. Two empty
masks count as a perfect match. Object-level TP/FN/FP use greedy one-to-one
matching by descending IoU with a 0.5 decision threshold by default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geo import BitMask, InvalidInputError


@dataclass(frozen=True)
class SegScore:
    iou: float
    dsi: float

    @property
    def dcl(self) -> float:
        return 1.0 - self.dsi


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class ClassificationMetrics:
    """Rates derived from a confusion matrix; None marks an undefined rate."""

    accuracy: float
    sensitivity: float | None
    specificity: float | None


def seg_score(pred: BitMask, truth: BitMask, valid: BitMask | None = None) -> SegScore:
    """Pixel-to-pixel IoU and Dice; ``valid`` restricts the counted pixels."""
    if pred.data.shape != truth.data.shape:
        raise InvalidInputError(
            f"mask shapes differ: {pred.data.shape} vs {truth.data.shape}")
    p, t = pred.data, truth.data
    if valid is not None:
        if valid.data.shape != p.shape:
            raise InvalidInputError("validity mask shape mismatch")
        p = p & valid.data
        t = t & valid.data
    inter = int((p & t).sum())
    np_, nt = int(p.sum()), int(t.sum())
    union = np_ + nt - inter
    if np_ == 0 and nt == 0:
        return SegScore(iou=1.0, dsi=1.0)
    return SegScore(iou=inter / union, dsi=2.0 * inter / (np_ + nt))


def classification_metrics(c: ConfusionCounts) -> ClassificationMetrics:
    if c.total == 0:
        raise InvalidInputError("empty confusion matrix")
    sens = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else None
    spec = c.tn / (c.tn + c.fp) if (c.tn + c.fp) > 0 else None
    return ClassificationMetrics(
        accuracy=(c.tp + c.tn) / c.total,
        sensitivity=sens,
        specificity=spec,
    )


def object_match(pred_components: "list[BitMask]",
                 truth_components: "list[BitMask]",
                 thresh: float = 0.5) -> ConfusionCounts:
    """Object-level matching: truth objects matched at IoU >= thresh are TP.

    Greedy one-to-one assignment by descending pairwise IoU; ties broken by
    (truth index, pred index) for determinism. TN is undefined for objects
    and reported as 0.
    """
    pairs = []
    for ti, t in enumerate(truth_components):
        for pi, p in enumerate(pred_components):
            s = seg_score(p, t)
            if s.iou > 0:
                pairs.append((s.iou, ti, pi))
    pairs.sort(key=lambda x: (-x[0], x[1], x[2]))
    matched_t: set[int] = set()
    matched_p: set[int] = set()
    tp = 0
    for iou, ti, pi in pairs:
        if ti in matched_t or pi in matched_p:
            continue
        if iou >= thresh:
            matched_t.add(ti)
            matched_p.add(pi)
            tp += 1
    fn = len(truth_components) - tp
    fp = len(pred_components) - tp
    return ConfusionCounts(tp=tp, tn=0, fp=fp, fn=fn)


def aggregate(scores: "list[SegScore]", weights: "list[int] | None" = None) -> SegScore:
    """Mean score: unweighted by default, pixel-weighted when weights given."""
    if not scores:
        raise InvalidInputError("cannot aggregate an empty score list")
    if weights is None:
        w = np.ones(len(scores))
    else:
        if len(weights) != len(scores):
            raise InvalidInputError("weights length mismatch")
        w = np.asarray(weights, dtype=float)
        if w.sum() <= 0:
            raise InvalidInputError("weights must sum to > 0")
    w = w / w.sum()
    return SegScore(
        iou=float(sum(wi * s.iou for wi, s in zip(w, scores))),
        dsi=float(sum(wi * s.dsi for wi, s in zip(w, scores))),
    )


def evaluation_report(per_clip: "dict[str, SegScore]",
                      pooled: SegScore | None = None,
                      objects: ConfusionCounts | None = None) -> dict:
    """Assemble the JSON evaluation report structure."""
    clips = [
        {"clip_id": cid, "iou": s.iou, "dsi": s.dsi, "dcl": s.dcl}
        for cid, s in sorted(per_clip.items())
    ]
    mean = aggregate(list(per_clip.values())) if per_clip else None
    report = {
        "clips": clips,
        "aggregate": {
            "mean_iou": mean.iou if mean else None,
            "mean_dsi": mean.dsi if mean else None,
            "mean_dcl": mean.dcl if mean else None,
            "pooled_iou": pooled.iou if pooled else None,
            "object": {"tp": objects.tp, "fp": objects.fp, "fn": objects.fn}
            if objects else None,
        },
    }
    return report


def report_table(report: dict) -> str:
    """Render the evaluation report as an aligned-column text table."""
    lines = [f"{'clip_id':<24}{'iou':>10}{'dsi':>10}{'dcl':>10}"]
    for row in report["clips"]:
        lines.append(f"{row['clip_id']:<24}{row['iou']:>10.4f}"
                     f"{row['dsi']:>10.4f}{row['dcl']:>10.4f}")
    agg = report["aggregate"]
    if agg["mean_iou"] is not None:
        lines.append(f"{'mean':<24}{agg['mean_iou']:>10.4f}"
                     f"{agg['mean_dsi']:>10.4f}{agg['mean_dcl']:>10.4f}")
    if agg.get("object"):
        o = agg["object"]
        lines.append(f"objects: tp={o['tp']} fp={o['fp']} fn={o['fn']}")
    return "\n".join(lines)


def save_report(path, report: dict) -> None:
    with open(path, "w") as f:
        json.dump(report, f, indent=2)
