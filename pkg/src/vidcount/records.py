"""Value types passed between pipeline stages and across file boundaries."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError, FormatError
from .geometry import BinaryMask, BoundingBox
from .validation import check_fraction, check_int, check_positive

CAUSAL_MODES = ("offline", "lagged", "immediate")

# Bare (unquoted) tokens in interchange lines: detection and track ids.
BARE_ID_RE = re.compile(r"[A-Za-z0-9_.:-]+\Z")


@dataclass(frozen=True)
class Detection:
    """One detector hit on one frame, optionally carrying a segmentation mask."""

    frame: int
    box: BoundingBox
    score: float
    label: str
    mask: BinaryMask | None = None
    id: str = ""

    def __post_init__(self):
        if not isinstance(self.frame, int) or self.frame < 0:
            raise FormatError(f"detection frame must be an int >= 0, got {self.frame!r}")
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise FormatError(f"detection score must be in [0, 1], got {self.score!r}")
        if self.id and not BARE_ID_RE.match(self.id):
            raise FormatError(f"detection id must match {BARE_ID_RE.pattern!r}, got {self.id!r}")


@dataclass(frozen=True)
class Prompt:
    """What to count: free text, exemplar boxes on given frames, or both."""

    text: str | None = None
    exemplars: tuple[tuple[int, BoundingBox], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "exemplars", tuple(self.exemplars))
        if self.text is None and not self.exemplars:
            raise FormatError("prompt needs text, exemplars, or both")
        if self.text is not None and not self.text.strip():
            raise FormatError("prompt text must be non-empty")
        for frame, box in self.exemplars:
            if not isinstance(frame, int) or frame < 0:
                raise FormatError(f"exemplar frame must be an int >= 0, got {frame!r}")
            if not isinstance(box, BoundingBox):
                raise FormatError("exemplar must pair a frame index with a BoundingBox")


@dataclass(frozen=True)
class GroundTruthTrack:
    """A single annotated object: its id, category, and mask on each visible frame."""

    track_id: str
    category: str
    per_frame: dict[int, BinaryMask] = field(default_factory=dict)

    def __post_init__(self):
        if not self.track_id or not BARE_ID_RE.match(self.track_id):
            raise FormatError(f"track id must match {BARE_ID_RE.pattern!r}, got {self.track_id!r}")
        if not self.per_frame:
            raise FormatError(f"track {self.track_id!r} has no frames")
        grids = {mask.grid for mask in self.per_frame.values()}
        if len(grids) > 1:
            raise FormatError(f"track {self.track_id!r} mixes mask grids: {sorted(grids)}")
        for frame in self.per_frame:
            if not isinstance(frame, int) or frame < 0:
                raise FormatError(f"track frame must be an int >= 0, got {frame!r}")

    @property
    def grid(self) -> tuple[int, int]:
        return next(iter(self.per_frame.values())).grid

    @property
    def frames(self) -> list[int]:
        return sorted(self.per_frame)


@dataclass(frozen=True)
class RunConfig:
    """Pipeline knobs; every field has the documented default."""

    target_fps: float = 3.0
    filter_window_w: int = 3
    match_iou: float = 0.5
    new_object_iou: float = 0.5
    score_threshold: float = 0.23
    causal_mode: str = "offline"
    seed: int = 0

    def __post_init__(self):
        check_positive("target_fps", self.target_fps)
        check_int("filter_window_w", self.filter_window_w, minimum=1)
        check_fraction("match_iou", self.match_iou)
        check_fraction("new_object_iou", self.new_object_iou)
        check_fraction("score_threshold", self.score_threshold)
        if self.causal_mode not in CAUSAL_MODES:
            raise ConfigError(
                f"causal_mode must be one of {list(CAUSAL_MODES)}, got {self.causal_mode!r}"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


def detections_by_frame(detections: Sequence[Detection]) -> dict[int, list[Detection]]:
    """Group detections into the frame-keyed map the pipeline stages consume."""
    grouped: dict[int, list[Detection]] = {}
    for det in detections:
        grouped.setdefault(det.frame, []).append(det)
    return {frame: grouped[frame] for frame in sorted(grouped)}
