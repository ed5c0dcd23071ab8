"""Counting error metrics and detection average precision."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EvalError
from .geometry import BoundingBox, box_iou
from .validation import check_fraction

# Written as exact hundredths so an IoU that equals a grid value compares
# against the same double a literal like 0.60 produces.
AP_RANGE_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))


@dataclass(frozen=True)
class EvalInput:
    """One prediction/ground-truth pair, optionally keyed by video and category."""

    predicted: float
    actual: float
    video: str = ""
    category: str = ""

    def __post_init__(self):
        if not math.isfinite(self.predicted) or not math.isfinite(self.actual):
            raise EvalError(
                f"counts must be finite, got ({self.predicted!r}, {self.actual!r})"
            )


def _as_inputs(pairs: Sequence) -> list[EvalInput]:
    out: list[EvalInput] = []
    for pair in pairs:
        if isinstance(pair, EvalInput):
            out.append(pair)
        else:
            predicted, actual = pair
            out.append(EvalInput(float(predicted), float(actual)))
    return out


def _mae_rmse(inputs: Sequence[EvalInput]) -> tuple[float, float]:
    errors = np.array([item.predicted - item.actual for item in inputs], dtype=float)
    mae = float(np.mean(np.abs(errors)))
    rmse = float(math.sqrt(float(np.mean(errors * errors))))
    return mae, rmse


def video_mae_rmse(pairs: Sequence) -> tuple[float, float]:
    """Mean absolute error and root mean squared error over per-video counts.

    Accepts EvalInput records or plain (predicted, actual) pairs.
    """
    inputs = _as_inputs(pairs)
    if not inputs:
        raise EvalError("need at least one (predicted, actual) pair")
    return _mae_rmse(inputs)


def multiclass_mae_rmse(pairs: Sequence[EvalInput]) -> tuple[float, float]:
    """MAE/RMSE where each sample is one (video, category) pair.

    Every input must carry video and category ids, and the pairs must be
    unique; the averages weight every category-video pair equally.
    """
    inputs = _as_inputs(pairs)
    if not inputs:
        raise EvalError("need at least one (video, category) pair")
    seen: set[tuple[str, str]] = set()
    for item in inputs:
        if not item.video or not item.category:
            raise EvalError("multiclass evaluation needs video and category on every pair")
        key = (item.video, item.category)
        if key in seen:
            raise EvalError(f"duplicate (video, category) pair {key}")
        seen.add(key)
    return _mae_rmse(inputs)


def greedy_match(
    scored_boxes: Sequence[tuple[BoundingBox, float]],
    gt_boxes: Sequence[BoundingBox],
    iou_threshold: float,
) -> list[tuple[float, bool]]:
    """Score-descending greedy matching within one frame.

    Each detection claims the unmatched ground truth with the highest IoU at or
    above the threshold (ties toward the lower ground-truth index). Returns one
    (score, matched) pair per detection.
    """
    check_fraction("iou_threshold", iou_threshold)
    order = sorted(range(len(scored_boxes)), key=lambda i: -scored_boxes[i][1])
    taken = [False] * len(gt_boxes)
    outcome: list[tuple[float, bool]] = [(0.0, False)] * len(scored_boxes)
    for i in order:
        box, score = scored_boxes[i]
        best_j = -1
        best = 0.0
        for j, gt in enumerate(gt_boxes):
            if taken[j]:
                continue
            value = box_iou(box, gt)
            if value >= iou_threshold and value > best:
                best = value
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
        outcome[i] = (score, best_j >= 0)
    return outcome


def ap_from_matches(matches: Sequence[tuple[float, bool]], n_gt: int) -> float:
    """101-point interpolated average precision from (score, matched) pairs."""
    if n_gt == 0:
        return 1.0 if not matches else 0.0
    if not matches:
        return 0.0
    scores = np.array([m[0] for m in matches], dtype=float)
    flags = np.array([m[1] for m in matches], dtype=bool)
    order = np.argsort(-scores, kind="stable")
    flags = flags[order]
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    total = 0.0
    for i in range(101):
        r = i / 100
        idx = int(np.searchsorted(recall, r, side="left"))
        if idx < len(envelope):
            total += float(envelope[idx])
    return total / 101.0


def ap_at_iou(
    scored_boxes: Sequence[tuple[BoundingBox, float]],
    gt_boxes: Sequence[BoundingBox],
    iou_threshold: float,
) -> float:
    """Average precision at one IoU threshold for a single frame."""
    return ap_from_matches(
        greedy_match(scored_boxes, gt_boxes, iou_threshold), len(gt_boxes)
    )


def ap_range(
    scored_boxes: Sequence[tuple[BoundingBox, float]],
    gt_boxes: Sequence[BoundingBox],
) -> float:
    """Mean AP over IoU thresholds 0.50, 0.55, ..., 0.95."""
    return float(
        np.mean([ap_at_iou(scored_boxes, gt_boxes, t) for t in AP_RANGE_THRESHOLDS])
    )
