"""Stage 2: temporal filtering of per-frame detections.

Each detection is treated as an anchor and propagated up to w-1 kept frames
backward and forward. A window frame counts as matched when the propagated
mask overlaps any Stage 1 detection mask on that frame with IoU strictly above
the match threshold; the anchor frame is matched by definition. The detection
survives iff the longest consecutive matched run containing the anchor spans
at least w kept frames.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

from .detection import resolve_workers
from .errors import FormatError
from .geometry import mask_iou
from .providers import TrackerInterface
from .records import Detection
from .validation import check_fraction, check_int


@dataclass(frozen=True)
class FilterVerdict:
    """Outcome for one anchor detection."""

    detection_id: str
    frame: int
    longest_run: int
    kept: bool
    error: str | None = None


def _check_per_frame(per_frame: Mapping[int, Sequence[Detection]]) -> list[int]:
    frames = sorted(per_frame)
    for frame in frames:
        if not isinstance(frame, int) or frame < 0:
            raise FormatError(f"frame keys must be ints >= 0, got {frame!r}")
        for det in per_frame[frame]:
            if det.frame != frame:
                raise FormatError(
                    f"detection {det.id!r} says frame {det.frame} but is filed under {frame}"
                )
            if det.mask is None or det.mask.is_empty:
                raise FormatError(
                    f"detection {det.id!r} on frame {frame} has no usable mask"
                )
    return frames


def _matched(
    prop_mask, present: bool, candidates: Sequence[Detection], match_iou: float
) -> bool:
    if not present or prop_mask.is_empty:
        return False
    for det in candidates:
        if mask_iou(prop_mask, det.mask) > match_iou:
            return True
    return False


def anchor_verdict(
    det: Detection,
    position: int,
    frames: list[int],
    positions: Mapping[int, int],
    per_frame: Mapping[int, Sequence[Detection]],
    tracker: TrackerInterface,
    window_w: int,
    match_iou: float,
) -> FilterVerdict:
    lo = max(0, position - window_w + 1)
    hi = min(len(frames) - 1, position + window_w - 1)
    backward = [frames[p] for p in range(position - 1, lo - 1, -1)]
    forward = [frames[p] for p in range(position + 1, hi + 1)]
    matched = {position: True}
    try:
        for targets in (backward, forward):
            if not targets:
                continue
            results = tracker.propagate(det.frame, det.mask, targets)
            if len(results) != len(targets):
                raise FormatError(
                    f"tracker returned {len(results)} results for {len(targets)} targets"
                )
            for target_frame, (prop_mask, present) in zip(targets, results):
                matched[positions[target_frame]] = _matched(
                    prop_mask, present, per_frame[target_frame], match_iou
                )
    except Exception as exc:
        # Fail open: an unavailable tracker must not silently drop detections.
        return FilterVerdict(det.id, det.frame, 0, True, error=str(exc))
    run = 1
    p = position - 1
    while p >= lo and matched.get(p, False):
        run += 1
        p -= 1
    p = position + 1
    while p <= hi and matched.get(p, False):
        run += 1
        p += 1
    return FilterVerdict(det.id, det.frame, run, run >= window_w)


def temporal_filter(
    per_frame: Mapping[int, Sequence[Detection]],
    tracker: TrackerInterface,
    window_w: int = 3,
    match_iou: float = 0.5,
    n_workers: int | None = None,
) -> tuple[dict[int, list[Detection]], list[FilterVerdict]]:
    """Filter a frame-keyed detection map; returns (surviving map, verdicts).

    The window is measured in kept-frame positions (the map's sorted keys), so
    subsampled videos filter over their own timeline. All frame keys survive in
    the output map, possibly with empty lists. With window_w == 1 everything is
    kept without consulting the tracker.
    """
    check_int("window_w", window_w, minimum=1)
    check_fraction("match_iou", match_iou)
    frames = _check_per_frame(per_frame)
    positions = {frame: i for i, frame in enumerate(frames)}
    anchors = [(positions[f], det) for f in frames for det in per_frame[f]]
    if window_w == 1:
        verdicts = [FilterVerdict(det.id, det.frame, 1, True) for _, det in anchors]
        filtered = {f: list(per_frame[f]) for f in frames}
        return filtered, verdicts

    def job(item):
        position, det = item
        return anchor_verdict(
            det, position, frames, positions, per_frame, tracker, window_w, match_iou
        )

    workers = resolve_workers(n_workers)
    if workers > 1 and len(anchors) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(job, anchors))
    else:
        verdicts = [job(item) for item in anchors]
    filtered: dict[int, list[Detection]] = {f: [] for f in frames}
    for (position, det), verdict in zip(anchors, verdicts):
        if verdict.kept:
            filtered[frames[position]].append(det)
    return filtered, verdicts


class SweepEntry(NamedTuple):
    kept: int
    removed: int
    per_frame: dict[int, list[Detection]]


def sweep_window(
    per_frame: Mapping[int, Sequence[Detection]],
    tracker: TrackerInterface,
    windows: Sequence[int],
    match_iou: float = 0.5,
    n_workers: int | None = None,
) -> dict[int, SweepEntry]:
    """Run the temporal filter once per window size; returns results keyed by w."""
    if not windows:
        raise FormatError("sweep needs at least one window size")
    out: dict[int, SweepEntry] = {}
    total = sum(len(dets) for dets in per_frame.values())
    for w in sorted(set(windows)):
        filtered, _ = temporal_filter(per_frame, tracker, w, match_iou, n_workers)
        kept = sum(len(dets) for dets in filtered.values())
        out[w] = SweepEntry(kept, total - kept, filtered)
    return out
