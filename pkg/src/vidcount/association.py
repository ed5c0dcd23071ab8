"""Stage 3: long-term masklet association and the causal counting modes.

Surviving detections are absorbed into masklets (whole-video mask tracks). At
each processed frame, detections are taken in descending score order; one
spawns a new masklet iff its best mask IoU against every existing masklet's
mask on that frame (including masklets spawned moments earlier on the same
frame) does not exceed the new-object threshold. Masklets are never retired,
so the global count is the number of masklets ever spawned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import FormatError
from .filtering import anchor_verdict, temporal_filter
from .geometry import BinaryMask, mask_iou
from .providers import TrackerInterface
from .records import CAUSAL_MODES, Detection
from .validation import check_fraction, check_int


@dataclass(frozen=True)
class Masklet:
    """One counted object: its id, birth frame, label, and per-frame masks.

    ``per_frame`` holds an entry for every processed frame from the birth frame
    on: the propagated (mask, present) pair, with absence encoded as an empty
    mask plus ``present=False``.
    """

    masklet_id: int
    birth_frame: int
    label: str
    per_frame: dict[int, tuple[BinaryMask, bool]]

    def visible_at(self, frame: int) -> bool:
        entry = self.per_frame.get(frame)
        return entry is not None and entry[1] and not entry[0].is_empty


@dataclass
class CountReport:
    """Counting output: per-frame visible totals, birth events, global count."""

    per_frame_visible: dict[int, int]
    births: list[tuple[int, int]]
    global_count: int
    errors: list[str] = field(default_factory=list)


class _MaskletState:
    __slots__ = ("masklet_id", "birth_frame", "label", "birth_mask", "masks")

    def __init__(self, masklet_id: int, birth_frame: int, label: str, birth_mask: BinaryMask):
        self.masklet_id = masklet_id
        self.birth_frame = birth_frame
        self.label = label
        self.birth_mask = birth_mask
        self.masks: dict[int, tuple[BinaryMask, bool]] = {birth_frame: (birth_mask, True)}

    def freeze(self) -> Masklet:
        return Masklet(self.masklet_id, self.birth_frame, self.label, dict(self.masks))


def _check_detection(det: Detection) -> None:
    if det.mask is None or det.mask.is_empty:
        raise FormatError(f"detection {det.id!r} on frame {det.frame} has no usable mask")


class _Associator:
    def __init__(self, tracker: TrackerInterface, new_object_iou: float):
        self.tracker = tracker
        self.new_object_iou = new_object_iou
        self.masklets: list[_MaskletState] = []
        self.births: list[tuple[int, int]] = []
        self.per_frame_visible: dict[int, int] = {}
        self.errors: list[str] = []

    def _absent(self, grid: tuple[int, int]) -> tuple[BinaryMask, bool]:
        return (BinaryMask.empty(*grid), False)

    def _propagate(self, masklet: _MaskletState, targets: Sequence[int]) -> None:
        if not targets:
            return
        try:
            results = self.tracker.propagate(masklet.birth_frame, masklet.birth_mask, targets)
            if len(results) != len(targets):
                raise FormatError(
                    f"tracker returned {len(results)} results for {len(targets)} targets"
                )
        except Exception as exc:
            self.errors.append(
                f"masklet {masklet.masklet_id}: propagation from frame "
                f"{masklet.birth_frame} failed: {exc}"
            )
            absent = self._absent(masklet.birth_mask.grid)
            for frame in targets:
                masklet.masks[frame] = absent
            return
        for frame, (mask, present) in zip(targets, results):
            masklet.masks[frame] = (mask, bool(present))

    def ensure_masks(self, frame: int) -> None:
        """Incrementally extend every live masklet to one more frame."""
        for masklet in self.masklets:
            if frame > masklet.birth_frame and frame not in masklet.masks:
                self._propagate(masklet, [frame])

    def process(
        self,
        frame: int,
        detections: Sequence[Detection],
        future_frames: Sequence[int] = (),
    ) -> None:
        ordered = sorted(detections, key=lambda d: -d.score)
        for det in ordered:
            _check_detection(det)
            best = 0.0
            for masklet in self.masklets:
                entry = masklet.masks.get(frame)
                if entry is None or not entry[1] or entry[0].is_empty:
                    continue
                value = mask_iou(det.mask, entry[0])
                if value > best:
                    best = value
                    if best > self.new_object_iou:
                        break
            if best > self.new_object_iou:
                continue
            masklet = _MaskletState(len(self.masklets), frame, det.label, det.mask)
            self.masklets.append(masklet)
            self.births.append((masklet.masklet_id, frame))
            self._propagate(masklet, future_frames)
        self.per_frame_visible[frame] = sum(
            1
            for m in self.masklets
            if (entry := m.masks.get(frame)) is not None and entry[1] and not entry[0].is_empty
        )

    @property
    def count(self) -> int:
        return len(self.masklets)

    def report(self) -> tuple[CountReport, list[Masklet]]:
        report = CountReport(
            per_frame_visible=dict(sorted(self.per_frame_visible.items())),
            births=list(self.births),
            global_count=self.count,
            errors=list(self.errors),
        )
        return report, [m.freeze() for m in self.masklets]


def associate_and_count(
    per_frame: Mapping[int, Sequence[Detection]],
    tracker: TrackerInterface,
    new_object_iou: float = 0.5,
) -> tuple[CountReport, list[Masklet]]:
    """Associate filtered detections into masklets over the whole video.

    Propagation happens once per masklet at its birth, covering all later
    processed frames. Returns the count report and the frozen masklets.
    """
    check_fraction("new_object_iou", new_object_iou)
    frames = sorted(per_frame)
    assoc = _Associator(tracker, new_object_iou)
    for index, frame in enumerate(frames):
        assoc.process(frame, per_frame[frame], future_frames=frames[index + 1 :])
    return assoc.report()


def causal_count(
    per_frame: Mapping[int, Sequence[Detection]],
    tracker: TrackerInterface,
    mode: str = "lagged",
    window_w: int = 3,
    match_iou: float = 0.5,
    new_object_iou: float = 0.5,
) -> list[tuple[int, int]]:
    """Streaming counts: one (frame, cumulative count) pair per processed frame.

    ``immediate`` skips the temporal filter and counts from raw Stage 1 output,
    so transient false positives show up instantly. ``lagged`` applies the full
    filter w kept frames behind the stream head: the value at position i covers
    anchors at positions <= i - w, whose windows are complete. ``offline``
    replays the batch pipeline and streams its cumulative births. All three
    streams are non-decreasing.
    """
    if mode not in CAUSAL_MODES:
        raise FormatError(f"causal mode must be one of {list(CAUSAL_MODES)}, got {mode!r}")
    check_int("window_w", window_w, minimum=1)
    check_fraction("match_iou", match_iou)
    check_fraction("new_object_iou", new_object_iou)
    frames = sorted(per_frame)
    positions = {frame: i for i, frame in enumerate(frames)}
    out: list[tuple[int, int]] = []
    if mode == "offline":
        filtered, _ = temporal_filter(per_frame, tracker, window_w, match_iou)
        assoc = _Associator(tracker, new_object_iou)
        for index, frame in enumerate(frames):
            assoc.process(frame, filtered[frame], future_frames=frames[index + 1 :])
            out.append((frame, assoc.count))
        return out
    assoc = _Associator(tracker, new_object_iou)
    if mode == "immediate":
        for frame in frames:
            assoc.ensure_masks(frame)
            assoc.process(frame, per_frame[frame])
            out.append((frame, assoc.count))
        return out
    for i, frame in enumerate(frames):
        j = i - window_w
        if j >= 0:
            past = frames[j]
            kept = []
            for det in per_frame[past]:
                verdict = anchor_verdict(
                    det, j, frames, positions, per_frame, tracker, window_w, match_iou
                )
                if verdict.kept:
                    kept.append(det)
            assoc.ensure_masks(past)
            assoc.process(past, kept)
        out.append((frame, assoc.count))
    return out
