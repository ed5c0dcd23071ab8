"""Frame planning and the detect-then-segment stage."""

import numpy as np
import pytest

from vidcount import (
    BinaryMask,
    BoundingBox,
    ConfigError,
    Detection,
    FramePlan,
    Prompt,
    StageError,
    plan_frames,
    resolve_workers,
    rle_encode,
    run_stage1,
)
from vidcount.providers import (
    DetectorInterface,
    PrecomputedSource,
    SegmenterInterface,
    TrackerInterface,
)
from vidcount.simulate import SplitMix64


def box_mask(r0: int, c0: int, h: int, w: int, grid=(16, 16)) -> BinaryMask:
    array = np.zeros(grid, dtype=bool)
    array[r0 : r0 + h, c0 : c0 + w] = True
    return rle_encode(array)


def test_plan_frames_subsamples_round_half_up():
    plan = plan_frames(30, 30.0, 3.0)
    assert plan.kept_indices == (0, 10, 20)
    plan = plan_frames(30, 24.0, 3.0)
    assert plan.kept_indices == (0, 8, 16, 24)
    # the half-up rule: 25/10 spacing keeps 0, 3 (2.5 rounds up), 5, 8, ...
    plan = plan_frames(10, 25.0, 10.0)
    assert plan.kept_indices == (0, 3, 5, 8)


def test_plan_frames_keeps_everything_at_or_above_source_rate():
    for target in (30.0, 31.0, 60.0):
        plan = plan_frames(12, 30.0, target)
        assert plan.kept_indices == tuple(range(12))


def test_plan_frames_always_keeps_frame_zero():
    rng = SplitMix64(11)
    for _ in range(200):
        total = rng.randint(1, 400)
        source = rng.uniform(1.0, 60.0)
        target = rng.uniform(0.2, 60.0)
        plan = plan_frames(total, source, target)
        kept = plan.kept_indices
        assert kept[0] == 0
        assert all(b > a for a, b in zip(kept, kept[1:]))
        assert kept[-1] < total


def test_plan_validation():
    with pytest.raises(ConfigError):
        plan_frames(0, 30.0, 3.0)
    with pytest.raises(ConfigError):
        plan_frames(10, 0.0, 3.0)
    with pytest.raises(ConfigError):
        FramePlan(10, 30.0, 3.0, (1, 2))
    with pytest.raises(ConfigError):
        FramePlan(10, 30.0, 3.0, (0, 10))
    with pytest.raises(ConfigError):
        FramePlan(10, 30.0, 3.0, (0, 2, 2))


def test_resolve_workers_env(monkeypatch):
    monkeypatch.delenv("VIDCOUNT_THREADS", raising=False)
    assert resolve_workers(None) == 1
    assert resolve_workers(4) == 4
    assert resolve_workers(0) == 1
    monkeypatch.setenv("VIDCOUNT_THREADS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("VIDCOUNT_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_workers(None)


def source_with(detections):
    return PrecomputedSource(detections)


def test_stage1_threshold_is_inclusive():
    mask = box_mask(2, 2, 4, 4)
    dets = [
        Detection(0, BoundingBox(2, 2, 4, 4), 0.23, "a", mask),
        Detection(0, BoundingBox(8, 8, 4, 4), 0.2299, "a", box_mask(8, 8, 4, 4)),
    ]
    source = source_with(dets)
    result = run_stage1(plan_frames(1, 3.0, 3.0), source, source)
    assert result.total == 1
    assert result.dropped_below_threshold == 1
    assert result.per_frame[0][0].score == 0.23


def test_stage1_drops_empty_masks_with_diagnostics():
    dets = [
        Detection(0, BoundingBox(2, 2, 4, 4), 0.9, "a", box_mask(2, 2, 4, 4)),
        Detection(0, BoundingBox(9, 9, 2, 2), 0.8, "a", None),
    ]
    source = source_with(dets)
    result = run_stage1(plan_frames(1, 3.0, 3.0), source, source)
    assert result.total == 1
    assert result.dropped_empty_masks == 1
    assert result.dropped_below_threshold == 0


def test_stage1_positional_ids():
    dets = [
        Detection(0, BoundingBox(2, 2, 4, 4), 0.2, "a", box_mask(2, 2, 4, 4)),
        Detection(0, BoundingBox(8, 8, 4, 4), 0.9, "a", box_mask(8, 8, 4, 4)),
        Detection(2, BoundingBox(2, 2, 4, 4), 0.9, "a", box_mask(2, 2, 4, 4)),
    ]
    source = source_with(dets)
    result = run_stage1(plan_frames(3, 3.0, 3.0), source, source)
    # ordinal reflects the raw proposal position, including dropped ones
    assert [d.id for d in result.all_detections()] == ["f0:1", "f2:0"]
    assert result.per_frame[1] == []


def test_stage1_worker_counts_agree():
    rng = SplitMix64(77)
    dets = []
    for frame in range(12):
        for _ in range(rng.randint(0, 4)):
            r0, c0 = rng.randint(0, 10), rng.randint(0, 10)
            dets.append(
                Detection(
                    frame,
                    BoundingBox(c0, r0, 4, 4),
                    rng.uniform(0.1, 1.0),
                    "a",
                    box_mask(r0, c0, 4, 4),
                )
            )
    plan = plan_frames(12, 3.0, 3.0)
    single = run_stage1(plan, source_with(dets), source_with(dets), n_workers=1)
    multi = run_stage1(plan, source_with(dets), source_with(dets), n_workers=4)
    assert single.per_frame == multi.per_frame
    assert single.dropped_below_threshold == multi.dropped_below_threshold


def test_stage1_wraps_provider_failures():
    class FailingDetector:
        def detect(self, frame, prompt=None):
            if frame == 2:
                raise RuntimeError("model exploded")
            return []

    class NoSegmenter:
        def segment(self, frame, box):
            raise RuntimeError("unreachable")

    plan = plan_frames(4, 3.0, 3.0)
    with pytest.raises(StageError) as info:
        run_stage1(plan, FailingDetector(), NoSegmenter())
    assert "frame 2" in str(info.value)


def test_stage1_prompt_bounds():
    source = source_with([])
    prompt = Prompt(text="a thing", exemplars=((9, BoundingBox(0, 0, 2, 2)),))
    with pytest.raises(ConfigError):
        run_stage1(plan_frames(4, 3.0, 3.0), source, source, prompt=prompt)
    ok = Prompt(text="a thing", exemplars=((3, BoundingBox(0, 0, 2, 2)),))
    result = run_stage1(plan_frames(4, 3.0, 3.0), source, source, prompt=ok)
    assert result.total == 0


def test_precomputed_source_protocols_and_errors():
    mask = box_mask(2, 2, 4, 4)
    det = Detection(0, BoundingBox(2, 2, 4, 4), 0.9, "a", mask)
    source = PrecomputedSource([det])
    assert isinstance(source, DetectorInterface)
    assert isinstance(source, SegmenterInterface)
    assert not isinstance(source, TrackerInterface)
    assert source.grid == (16, 16)
    assert source.frames == [0]
    assert source.segment(0, det.box) == mask
    with pytest.raises(StageError):
        source.segment(0, det.box)  # queue exhausted
    with pytest.raises(StageError):
        source.segment(5, det.box)
    maskless = PrecomputedSource([Detection(0, BoundingBox(0, 0, 1, 1), 0.9, "a")])
    with pytest.raises(StageError):
        maskless.segment(0, BoundingBox(0, 0, 1, 1))
    sized = PrecomputedSource(
        [Detection(0, BoundingBox(0, 0, 1, 1), 0.9, "a")], grid=(8, 8)
    )
    assert sized.segment(0, BoundingBox(0, 0, 1, 1)).is_empty
