"""Stage 1: frame subsampling and the per-frame detect-then-segment pass."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import ConfigError, StageError
from .providers import DetectorInterface, SegmenterInterface
from .records import Detection, Prompt
from .validation import check_fraction, check_int, check_positive


def resolve_workers(n_workers: int | None) -> int:
    """Explicit worker count, else the VIDCOUNT_THREADS env cap, else 1."""
    if n_workers is None:
        raw = os.environ.get("VIDCOUNT_THREADS", "1")
        try:
            n_workers = int(raw)
        except ValueError:
            raise ConfigError(f"VIDCOUNT_THREADS must be an integer, got {raw!r}") from None
    return max(1, int(n_workers))


@dataclass(frozen=True)
class FramePlan:
    """Which source frame indices the pipeline will process."""

    total_frames: int
    source_fps: float
    target_fps: float
    kept_indices: tuple[int, ...]

    def __post_init__(self):
        if not self.kept_indices or self.kept_indices[0] != 0:
            raise ConfigError("frame plan must keep frame 0")
        if list(self.kept_indices) != sorted(set(self.kept_indices)):
            raise ConfigError("kept indices must be strictly increasing")
        if self.kept_indices[-1] >= self.total_frames:
            raise ConfigError("kept indices must lie inside the video")


def plan_frames(total_frames: int, source_fps: float, target_fps: float) -> FramePlan:
    """Subsample frames to approximately target_fps by round-half-up spacing.

    Keeps index floor(k * source_fps / target_fps + 0.5) for k = 0, 1, ...;
    a target at or above the source rate keeps every frame.
    """
    check_int("total_frames", total_frames, minimum=1)
    check_positive("source_fps", source_fps)
    check_positive("target_fps", target_fps)
    if target_fps >= source_fps:
        return FramePlan(total_frames, source_fps, target_fps, tuple(range(total_frames)))
    ratio = source_fps / target_fps
    kept: list[int] = []
    k = 0
    while True:
        index = math.floor(k * ratio + 0.5)
        if index >= total_frames:
            break
        if not kept or index > kept[-1]:
            kept.append(index)
        k += 1
    return FramePlan(total_frames, source_fps, target_fps, tuple(kept))


@dataclass
class Stage1Result:
    per_frame: dict[int, list[Detection]]
    dropped_empty_masks: int = 0
    dropped_below_threshold: int = 0

    @property
    def total(self) -> int:
        return sum(len(dets) for dets in self.per_frame.values())

    def all_detections(self) -> list[Detection]:
        return [det for frame in sorted(self.per_frame) for det in self.per_frame[frame]]


@dataclass
class _FrameOutcome:
    detections: list[Detection] = field(default_factory=list)
    dropped_empty: int = 0
    dropped_threshold: int = 0


def _process_frame(
    frame: int,
    detector: DetectorInterface,
    segmenter: SegmenterInterface,
    prompt: Prompt | None,
    score_threshold: float,
) -> _FrameOutcome:
    try:
        proposals = detector.detect(frame, prompt)
    except Exception as exc:
        raise StageError(f"detector failed on frame {frame}: {exc}") from exc
    outcome = _FrameOutcome()
    for ordinal, (box, score, label) in enumerate(proposals):
        if score < score_threshold:
            outcome.dropped_threshold += 1
            continue
        try:
            mask = segmenter.segment(frame, box)
        except Exception as exc:
            raise StageError(f"segmenter failed on frame {frame}: {exc}") from exc
        if mask.is_empty:
            outcome.dropped_empty += 1
            continue
        outcome.detections.append(
            Detection(frame, box, score, label, mask, id=f"f{frame}:{ordinal}")
        )
    return outcome


def run_stage1(
    plan: FramePlan,
    detector: DetectorInterface,
    segmenter: SegmenterInterface,
    prompt: Prompt | None = None,
    score_threshold: float = 0.23,
    n_workers: int | None = None,
) -> Stage1Result:
    """Detect and segment on each planned frame.

    Proposals below the score threshold are dropped and counted; proposals
    whose mask comes back empty are likewise dropped and counted. Detection ids
    are positional (`f<frame>:<ordinal>`), so output is identical for any
    worker count.
    """
    check_fraction("score_threshold", score_threshold)
    if prompt is not None:
        for frame, _ in prompt.exemplars:
            if frame >= plan.total_frames:
                raise ConfigError(
                    f"prompt exemplar frame {frame} is outside the {plan.total_frames}-frame video"
                )
    workers = resolve_workers(n_workers)
    frames = list(plan.kept_indices)
    if workers > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(
                    lambda f: _process_frame(f, detector, segmenter, prompt, score_threshold),
                    frames,
                )
            )
    else:
        outcomes = [
            _process_frame(f, detector, segmenter, prompt, score_threshold) for f in frames
        ]
    result = Stage1Result(per_frame={})
    for frame, outcome in zip(frames, outcomes):
        result.per_frame[frame] = outcome.detections
        result.dropped_empty_masks += outcome.dropped_empty
        result.dropped_below_threshold += outcome.dropped_threshold
    return result
