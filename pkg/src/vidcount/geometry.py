"""Boxes, run-length-encoded binary masks, overlap measures, and the box loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import FormatError, ShapeError, UndefinedOverlapError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in continuous image coordinates (x right, y down)."""

    x_min: float
    y_min: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "width", "height"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise FormatError(f"box {name} must be finite, got {value!r}")
        if self.width < 0 or self.height < 0:
            raise FormatError(
                f"box width/height must be >= 0, got {self.width!r} x {self.height!r}"
            )

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float) -> BoundingBox:
        return cls(cx - width / 2.0, cy - height / 2.0, width, height)

    @property
    def x_max(self) -> float:
        return self.x_min + self.width

    @property
    def y_max(self) -> float:
        return self.y_min + self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.width / 2.0, self.y_min + self.height / 2.0)

    @property
    def area(self) -> float:
        return self.width * self.height

    def is_degenerate(self) -> bool:
        return self.width == 0 or self.height == 0


def _corner_areas(a: BoundingBox, b: BoundingBox):
    ax1, ay1, ax2, ay2 = a.x_min, a.y_min, a.x_min + a.width, a.y_min + a.height
    bx1, by1, bx2, by2 = b.x_min, b.y_min, b.x_min + b.width, b.y_min + b.height
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = iw * ih if (iw > 0 and ih > 0) else 0.0
    return (ax1, ay1, ax2, ay2), (bx1, by1, bx2, by2), area_a, area_b, inter


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Exactly one degenerate (zero-area) operand gives 0.0; two degenerate
    operands have no defined overlap and raise UndefinedOverlapError.
    """
    _, _, area_a, area_b, inter = _corner_areas(a, b)
    if area_a == 0 and area_b == 0:
        raise UndefinedOverlapError("IoU of two zero-area boxes is undefined")
    if area_a == 0 or area_b == 0:
        return 0.0
    # Grouped so that full containment yields union == outer area bit-for-bit,
    # whichever operand is the inner box.
    union = max(area_a, area_b) + (min(area_a, area_b) - inter)
    return inter / union


def box_giou(a: BoundingBox, b: BoundingBox) -> float:
    """Generalized IoU: IoU minus the hull area not covered by the union.

    Lies in (-1, 1]; equals plain IoU whenever one box contains the other.
    """
    (ax1, ay1, ax2, ay2), (bx1, by1, bx2, by2), area_a, area_b, inter = _corner_areas(a, b)
    if area_a == 0 and area_b == 0:
        raise UndefinedOverlapError("GIoU of two zero-area boxes is undefined")
    union = max(area_a, area_b) + (min(area_a, area_b) - inter)
    iou = inter / union if (area_a > 0 and area_b > 0) else 0.0
    hull = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    return iou - (hull - union) / hull


@dataclass(frozen=True)
class BinaryMask:
    """Binary mask stored as row-major run-length counts.

    Runs alternate zero-count first: ``runs[0]`` zeros, then ``runs[1]`` ones,
    and so on. Counts are >= 0 and must sum to ``grid_height * grid_width``.
    """

    grid_height: int
    grid_width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.grid_height, int) or not isinstance(self.grid_width, int):
            raise FormatError("mask grid dimensions must be integers")
        if self.grid_height < 1 or self.grid_width < 1:
            raise FormatError(
                f"mask grid must be at least 1x1, got {self.grid_height}x{self.grid_width}"
            )
        object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))
        total = 0
        previous_zero = False
        for r in self.runs:
            if r < 0:
                raise FormatError(f"mask run counts must be >= 0, got {r}")
            if r == 0 and previous_zero:
                raise FormatError("mask runs contain two adjacent zero-length runs")
            previous_zero = r == 0
            total += r
        if total != self.grid_height * self.grid_width:
            raise FormatError(
                f"mask runs sum to {total}, expected "
                f"{self.grid_height}x{self.grid_width}={self.grid_height * self.grid_width}"
            )

    @classmethod
    def from_array(cls, array: np.ndarray) -> BinaryMask:
        return rle_encode(array)

    @classmethod
    def empty(cls, grid_height: int, grid_width: int) -> BinaryMask:
        return cls(grid_height, grid_width, (grid_height * grid_width,))

    @property
    def grid(self) -> tuple[int, int]:
        return (self.grid_height, self.grid_width)

    @cached_property
    def area(self) -> int:
        return sum(self.runs[1::2])

    @property
    def is_empty(self) -> bool:
        return self.area == 0

    @cached_property
    def dense(self) -> np.ndarray:
        """Read-only dense bool array view of the mask."""
        values = np.arange(len(self.runs), dtype=np.int64) % 2
        flat = np.repeat(values.astype(bool), np.asarray(self.runs, dtype=np.int64))
        array = flat.reshape(self.grid_height, self.grid_width)
        array.setflags(write=False)
        return array

    @cached_property
    def bbox(self) -> tuple[int, int, int, int] | None:
        """Half-open pixel bounds (r0, c0, r1, c1) of the foreground, or None."""
        if self.area == 0:
            return None
        rows = np.flatnonzero(self.dense.any(axis=1))
        cols = np.flatnonzero(self.dense.any(axis=0))
        return (int(rows[0]), int(cols[0]), int(rows[-1]) + 1, int(cols[-1]) + 1)

    def to_array(self) -> np.ndarray:
        return rle_decode(self)


def rle_encode(array: np.ndarray) -> BinaryMask:
    """Encode a 2-D truthy array into a canonical run-length mask."""
    array = np.asarray(array)
    if array.ndim != 2:
        raise FormatError(f"mask array must be 2-D, got shape {array.shape}")
    height, width = array.shape
    if height < 1 or width < 1:
        raise FormatError(f"mask grid must be at least 1x1, got {height}x{width}")
    flat = array.astype(bool).ravel()
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return BinaryMask(int(height), int(width), tuple(int(r) for r in runs))


def rle_decode(mask: BinaryMask) -> np.ndarray:
    """Decode a run-length mask into a writable dense bool array."""
    return mask.dense.copy()


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two masks on the same grid.

    Either operand empty gives 0.0 (no defined overlap to measure).
    """
    if a.grid != b.grid:
        raise ShapeError(f"mask grids differ: {a.grid} vs {b.grid}")
    if a.area == 0 or b.area == 0:
        return 0.0
    ar0, ac0, ar1, ac1 = a.bbox
    br0, bc0, br1, bc1 = b.bbox
    r0, c0 = max(ar0, br0), max(ac0, bc0)
    r1, c1 = min(ar1, br1), min(ac1, bc1)
    if r0 >= r1 or c0 >= c1:
        return 0.0
    inter = int(np.count_nonzero(a.dense[r0:r1, c0:c1] & b.dense[r0:r1, c0:c1]))
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class LossWeights:
    """Multipliers for the localization, GIoU, and classification loss terms."""

    loc: float = 5.0
    giou: float = 2.0
    cls: float = 2.0

    def __post_init__(self):
        for name in ("loc", "giou", "cls"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise FormatError(f"loss weight {name} must be finite and >= 0")


class LossTerms(NamedTuple):
    center: float
    hw: float
    giou: float


def exemplar_loss_terms(pred: BoundingBox, gt: BoundingBox) -> LossTerms:
    """Per-box loss terms: L1 center offset, L1 size offset, and 1 - GIoU."""
    pcx, pcy = pred.center
    gcx, gcy = gt.center
    l_center = abs(pcx - gcx) + abs(pcy - gcy)
    l_hw = abs(pred.width - gt.width) + abs(pred.height - gt.height)
    l_giou = 1.0 - box_giou(pred, gt)
    return LossTerms(l_center, l_hw, l_giou)


def total_loss(terms: LossTerms, l_cls: float, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum: loc * (hw + center) + giou * giou_term + cls * cls_term."""
    if not math.isfinite(l_cls):
        raise FormatError(f"classification loss must be finite, got {l_cls!r}")
    return (
        weights.loc * (terms.hw + terms.center)
        + weights.giou * terms.giou
        + weights.cls * l_cls
    )
