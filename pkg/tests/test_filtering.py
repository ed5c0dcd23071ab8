"""Temporal filtering of transient detections with a scripted tracker."""

import numpy as np
import pytest

from vidcount import (
    BinaryMask,
    BoundingBox,
    Detection,
    FormatError,
    rle_encode,
    sweep_window,
    temporal_filter,
)

GRID = (20, 20)


def box_mask(r0: int, c0: int, h: int = 4, w: int = 4) -> BinaryMask:
    array = np.zeros(GRID, dtype=bool)
    array[r0 : r0 + h, c0 : c0 + w] = True
    return rle_encode(array)


def det(frame: int, r0: int, c0: int, det_id: str) -> Detection:
    return Detection(frame, BoundingBox(c0, r0, 4, 4), 0.9, "a", box_mask(r0, c0), id=det_id)


class StaticTracker:
    """Propagates the anchor mask unchanged to every target frame."""

    def __init__(self):
        self.calls = 0

    def propagate(self, anchor_frame, anchor_mask, target_frames):
        self.calls += 1
        return [(anchor_mask, True) for _ in target_frames]


class ScriptedTracker:
    """Presence looked up per (rounded anchor corner, target frame)."""

    def __init__(self, present):
        self.present = present

    def propagate(self, anchor_frame, anchor_mask, target_frames):
        r0, c0, _, _ = anchor_mask.bbox
        out = []
        for frame in target_frames:
            if self.present.get(((r0, c0), frame), True):
                out.append((anchor_mask, True))
            else:
                out.append((BinaryMask.empty(*GRID), False))
        return out


class BrokenTracker:
    def propagate(self, anchor_frame, anchor_mask, target_frames):
        raise RuntimeError("tracker offline")


def persistent_object(frames, r0=2, c0=2, tag="obj"):
    return {f: [det(f, r0, c0, f"{tag}.f{f}")] for f in frames}


def merge(*maps):
    out = {}
    for m in maps:
        for frame, dets in m.items():
            out.setdefault(frame, []).extend(dets)
    return out


def kept_ids(filtered):
    return {d.id for dets in filtered.values() for d in dets}


def test_persistent_object_survives_and_transient_is_removed():
    base = persistent_object(range(6))
    blip = {2: [det(2, 12, 12, "blip.f2")]}
    per_frame = merge(base, blip)
    filtered, verdicts = temporal_filter(per_frame, StaticTracker(), window_w=3)
    assert kept_ids(filtered) == {f"obj.f{f}" for f in range(6)}
    removed = [v for v in verdicts if not v.kept]
    assert [v.detection_id for v in removed] == ["blip.f2"]
    assert removed[0].longest_run == 1


def test_window_one_keeps_everything_without_tracker():
    per_frame = merge(persistent_object(range(3)), {1: [det(1, 12, 12, "blip")]})
    tracker = StaticTracker()
    filtered, verdicts = temporal_filter(per_frame, tracker, window_w=1)
    assert tracker.calls == 0
    assert kept_ids(filtered) == {"obj.f0", "obj.f1", "obj.f2", "blip"}
    assert all(v.kept and v.longest_run == 1 for v in verdicts)


def test_window_clamps_at_video_edges():
    # object present on all three frames of a three-frame video
    per_frame = persistent_object(range(3))
    filtered, verdicts = temporal_filter(per_frame, StaticTracker(), window_w=3)
    assert kept_ids(filtered) == {"obj.f0", "obj.f1", "obj.f2"}
    assert all(v.longest_run == 3 for v in verdicts)


def test_run_must_contain_anchor():
    # object visible on frames 0,1 and 3,4 but hidden on frame 2: the anchor
    # at frame 0 sees matched={0,1}, unmatched at 2, so its run is 2 < 3
    present = {((2, 2), 2): False}
    frames = [0, 1, 3, 4]
    per_frame = merge(persistent_object(frames), {2: [det(2, 12, 12, "other")]})
    tracker = ScriptedTracker(present)
    filtered, verdicts = temporal_filter(per_frame, tracker, window_w=3)
    by_id = {v.detection_id: v for v in verdicts}
    assert by_id["obj.f0"].longest_run == 2
    assert not by_id["obj.f0"].kept
    # the anchor at frame 3 has matched frames 3,4 plus 1 beyond the gap:
    # gap at position 2 breaks the run, so 3,4 only fails w=3 too
    assert by_id["obj.f3"].longest_run == 2


def test_match_is_strictly_above_threshold():
    # propagated mask overlaps candidate with IoU exactly 0.5: not a match
    anchor = det(0, 2, 2, "a0")
    overlap_half = det(1, 2, 2, "half")
    half_mask = box_mask(2, 2, 2, 4)  # half the area, fully inside
    overlap_half = Detection(1, overlap_half.box, 0.9, "a", half_mask, id="half")
    per_frame = {0: [anchor], 1: [overlap_half]}
    filtered, verdicts = temporal_filter(per_frame, StaticTracker(), window_w=2)
    by_id = {v.detection_id: v for v in verdicts}
    assert by_id["a0"].longest_run == 1
    assert not by_id["a0"].kept


def test_tracker_failure_fails_open():
    per_frame = persistent_object(range(3))
    filtered, verdicts = temporal_filter(per_frame, BrokenTracker(), window_w=3)
    assert kept_ids(filtered) == {"obj.f0", "obj.f1", "obj.f2"}
    for v in verdicts:
        assert v.kept and v.longest_run == 0
        assert "tracker offline" in v.error


def test_subsampled_frame_keys_window_in_positions():
    # kept frames 0,10,20,30: a window of 2 spans adjacent kept frames
    frames = [0, 10, 20, 30]
    per_frame = merge(persistent_object(frames), {10: [det(10, 12, 12, "blip")]})
    filtered, verdicts = temporal_filter(per_frame, StaticTracker(), window_w=2)
    assert "blip" not in kept_ids(filtered)
    assert {f"obj.f{f}" for f in frames} <= kept_ids(filtered)


def test_filtered_map_preserves_all_frame_keys():
    per_frame = merge(persistent_object([0, 1, 2]), {3: [det(3, 12, 12, "blip")]})
    filtered, _ = temporal_filter(per_frame, StaticTracker(), window_w=3)
    assert sorted(filtered) == [0, 1, 2, 3]
    assert filtered[3] == []


def test_input_validation():
    with pytest.raises(FormatError):
        temporal_filter({0: [det(1, 2, 2, "wrong-frame")]}, StaticTracker())
    maskless = Detection(0, BoundingBox(0, 0, 2, 2), 0.9, "a")
    with pytest.raises(FormatError):
        temporal_filter({0: [maskless]}, StaticTracker())

    class ShortTracker:
        def propagate(self, anchor_frame, anchor_mask, target_frames):
            return []

    # a tracker that answers with the wrong count is an error, which fails open
    _, verdicts = temporal_filter(persistent_object(range(3)), ShortTracker(), window_w=2)
    assert all(v.kept and v.error for v in verdicts)


def test_worker_counts_agree():
    per_frame = merge(
        persistent_object(range(8)),
        {3: [det(3, 12, 12, "b3")]},
        {5: [det(5, 12, 2, "b5")]},
    )
    f1, v1 = temporal_filter(per_frame, StaticTracker(), window_w=3, n_workers=1)
    f4, v4 = temporal_filter(per_frame, StaticTracker(), window_w=3, n_workers=4)
    assert f1 == f4
    assert v1 == v4


def test_sweep_window_monotone_for_nested_windows():
    per_frame = merge(
        persistent_object(range(10)),
        {4: [det(4, 12, 12, "blip1")]},
        {7: [det(7, 12, 2, "blip2")], 8: [det(8, 12, 2, "blip2b")]},
    )
    results = sweep_window(per_frame, StaticTracker(), [1, 2, 3, 6])
    assert sorted(results) == [1, 2, 3, 6]
    kept = [results[w].kept for w in (1, 2, 3, 6)]
    assert kept[0] == 13
    assert all(a >= b for a, b in zip(kept, kept[1:]))
    assert results[1].removed == 0
    with pytest.raises(FormatError):
        sweep_window(per_frame, StaticTracker(), [])
