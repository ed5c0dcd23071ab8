"""Pluggable provider protocols and the file-backed provider.

A detector proposes scored boxes per frame, a segmenter turns a box into a
mask, and a tracker propagates an anchor mask to other frames. The pipeline
only ever talks to these three protocols, so synthetic, file-backed, and real
model providers are interchangeable.
"""

from __future__ import annotations

from collections import deque
from typing import Protocol, Sequence, runtime_checkable

from .errors import StageError
from .geometry import BinaryMask, BoundingBox
from .records import Detection, Prompt


@runtime_checkable
class DetectorInterface(Protocol):
    def detect(
        self, frame: int, prompt: Prompt | None = None
    ) -> list[tuple[BoundingBox, float, str]]:
        """Scored, labeled box proposals for one frame."""
        ...


@runtime_checkable
class SegmenterInterface(Protocol):
    def segment(self, frame: int, box: BoundingBox) -> BinaryMask:
        """Segmentation mask for one box proposal on one frame."""
        ...


@runtime_checkable
class TrackerInterface(Protocol):
    def propagate(
        self, anchor_frame: int, anchor_mask: BinaryMask, target_frames: Sequence[int]
    ) -> list[tuple[BinaryMask, bool]]:
        """Propagate an anchor mask to target frames, ordered away from the anchor.

        Returns one (mask, present) pair per target frame; an absent object is
        reported as (empty mask, False).
        """
        ...


class PrecomputedSource:
    """Detector + segmenter backed by an already-parsed detection list.

    Masks are handed back per (frame, box) in file order; a detection that came
    without a mask segments to the empty mask, which Stage 1 then drops and
    counts in its diagnostics.
    """

    def __init__(self, detections: Sequence[Detection], grid: tuple[int, int] | None = None):
        self._by_frame: dict[int, list[Detection]] = {}
        self._masks: dict[tuple[int, float, float, float, float], deque[BinaryMask | None]] = {}
        for det in detections:
            self._by_frame.setdefault(det.frame, []).append(det)
            self._masks.setdefault(self._key(det.frame, det.box), deque()).append(det.mask)
            if grid is None and det.mask is not None:
                grid = det.mask.grid
        self._grid = grid

    @staticmethod
    def _key(frame: int, box: BoundingBox) -> tuple[int, float, float, float, float]:
        return (frame, box.x_min, box.y_min, box.width, box.height)

    @property
    def grid(self) -> tuple[int, int] | None:
        return self._grid

    @property
    def frames(self) -> list[int]:
        return sorted(self._by_frame)

    def detect(
        self, frame: int, prompt: Prompt | None = None
    ) -> list[tuple[BoundingBox, float, str]]:
        return [(d.box, d.score, d.label) for d in self._by_frame.get(frame, [])]

    def segment(self, frame: int, box: BoundingBox) -> BinaryMask:
        queue = self._masks.get(self._key(frame, box))
        if not queue:
            raise StageError(f"no stored mask for frame {frame} box {box}")
        mask = queue.popleft()
        if mask is not None:
            return mask
        if self._grid is None:
            raise StageError(
                f"detection on frame {frame} has no mask and the grid is unknown"
            )
        return BinaryMask.empty(*self._grid)
