"""sklearn-style estimator wrappers and the end-to-end pipeline runner."""

from __future__ import annotations

from dataclasses import dataclass, field

from sklearn.base import BaseEstimator, TransformerMixin

from .association import CountReport, Masklet, associate_and_count, causal_count
from .detection import FramePlan, Stage1Result, plan_frames, run_stage1
from .errors import ConfigError
from .filtering import FilterVerdict, temporal_filter
from .records import Detection, Prompt, RunConfig


@dataclass
class PipelineResult:
    """Everything one batch pipeline run produced."""

    plan: FramePlan
    stage1: Stage1Result
    filtered: dict[int, list[Detection]]
    verdicts: list[FilterVerdict]
    report: CountReport
    masklets: list[Masklet] = field(default_factory=list)


def run_pipeline(
    n_frames: int,
    detector,
    segmenter,
    tracker,
    config: RunConfig = RunConfig(),
    source_fps: float | None = None,
    prompt: Prompt | None = None,
    n_workers: int | None = None,
    use_filter: bool = True,
) -> PipelineResult:
    """Plan frames, detect, filter, and associate in one call.

    With use_filter=False Stage 2 is skipped entirely (the ablation and the
    immediate causal mode), so transient detections reach association.
    """
    source = source_fps if source_fps is not None else config.target_fps
    plan = plan_frames(n_frames, source, config.target_fps)
    stage1 = run_stage1(
        plan, detector, segmenter, prompt, config.score_threshold, n_workers
    )
    if use_filter:
        filtered, verdicts = temporal_filter(
            stage1.per_frame, tracker, config.filter_window_w, config.match_iou, n_workers
        )
    else:
        filtered, verdicts = {f: list(d) for f, d in stage1.per_frame.items()}, []
    report, masklets = associate_and_count(filtered, tracker, config.new_object_iou)
    return PipelineResult(plan, stage1, filtered, verdicts, report, masklets)


class TemporalFilter(TransformerMixin, BaseEstimator):
    """Estimator face of the Stage 2 temporal filter.

    transform() consumes a frame-keyed detection map and returns the surviving
    map; the verdicts land in ``verdicts_``.
    """

    def __init__(self, tracker=None, window_w: int = 3, match_iou: float = 0.5,
                 n_workers: int | None = None):
        self.tracker = tracker
        self.window_w = window_w
        self.match_iou = match_iou
        self.n_workers = n_workers

    def fit(self, X=None, y=None):
        if self.tracker is None:
            raise ConfigError("TemporalFilter needs a tracker")
        return self

    def transform(self, X: dict[int, list[Detection]]) -> dict[int, list[Detection]]:
        self.fit()
        filtered, verdicts = temporal_filter(
            X, self.tracker, self.window_w, self.match_iou, self.n_workers
        )
        self.verdicts_ = verdicts
        return filtered


class MaskletAssociator(BaseEstimator):
    """Estimator face of Stage 3 long-term association."""

    def __init__(self, tracker=None, new_object_iou: float = 0.5):
        self.tracker = tracker
        self.new_object_iou = new_object_iou

    def fit(self, X=None, y=None):
        if self.tracker is None:
            raise ConfigError("MaskletAssociator needs a tracker")
        return self

    def predict(self, X: dict[int, list[Detection]]) -> CountReport:
        self.fit()
        report, masklets = associate_and_count(X, self.tracker, self.new_object_iou)
        self.report_ = report
        self.masklets_ = masklets
        return report


class VideoCounter(BaseEstimator):
    """Whole-pipeline estimator: predict() counts a video, stream() counts causally.

    predict(n_frames) always runs the batch (offline) pipeline and returns its
    CountReport. stream(n_frames) honors ``causal_mode``: lagged output trails
    the stream head by ``filter_window_w`` kept frames; immediate skips the
    temporal filter. ``source_fps=None`` treats the input as already sampled at
    the target rate.
    """

    def __init__(
        self,
        detector=None,
        segmenter=None,
        tracker=None,
        source_fps: float | None = None,
        target_fps: float = 3.0,
        filter_window_w: int = 3,
        match_iou: float = 0.5,
        new_object_iou: float = 0.5,
        score_threshold: float = 0.23,
        causal_mode: str = "offline",
        seed: int = 0,
        prompt: Prompt | None = None,
        n_workers: int | None = None,
    ):
        self.detector = detector
        self.segmenter = segmenter
        self.tracker = tracker
        self.source_fps = source_fps
        self.target_fps = target_fps
        self.filter_window_w = filter_window_w
        self.match_iou = match_iou
        self.new_object_iou = new_object_iou
        self.score_threshold = score_threshold
        self.causal_mode = causal_mode
        self.seed = seed
        self.prompt = prompt
        self.n_workers = n_workers

    def _config(self) -> RunConfig:
        return RunConfig(
            target_fps=self.target_fps,
            filter_window_w=self.filter_window_w,
            match_iou=self.match_iou,
            new_object_iou=self.new_object_iou,
            score_threshold=self.score_threshold,
            causal_mode=self.causal_mode,
            seed=self.seed,
        )

    def fit(self, X=None, y=None):
        self._config()
        for name in ("detector", "segmenter", "tracker"):
            if getattr(self, name) is None:
                raise ConfigError(f"VideoCounter needs a {name}")
        return self

    def predict(self, X: int) -> CountReport:
        """Batch-count a video of X source frames."""
        self.fit()
        result = run_pipeline(
            X,
            self.detector,
            self.segmenter,
            self.tracker,
            self._config(),
            source_fps=self.source_fps,
            prompt=self.prompt,
            n_workers=self.n_workers,
        )
        self.plan_ = result.plan
        self.stage1_ = result.stage1
        self.filtered_ = result.filtered
        self.verdicts_ = result.verdicts
        self.report_ = result.report
        self.masklets_ = result.masklets
        return result.report

    def stream(self, X: int) -> list[tuple[int, int]]:
        """Causal per-frame counts for a video of X source frames."""
        self.fit()
        config = self._config()
        source = self.source_fps if self.source_fps is not None else config.target_fps
        plan = plan_frames(X, source, config.target_fps)
        stage1 = run_stage1(
            plan, self.detector, self.segmenter, self.prompt,
            config.score_threshold, self.n_workers,
        )
        self.plan_ = plan
        self.stage1_ = stage1
        self.stream_ = causal_count(
            stage1.per_frame,
            self.tracker,
            mode=config.causal_mode,
            window_w=config.filter_window_w,
            match_iou=config.match_iou,
            new_object_iou=config.new_object_iou,
        )
        return self.stream_
