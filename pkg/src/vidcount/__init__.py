"""Open-world video object counting: detect, filter, associate, count."""

from .association import CountReport, Masklet, associate_and_count, causal_count
from .detection import FramePlan, Stage1Result, plan_frames, resolve_workers, run_stage1
from .errors import (
    ConfigError,
    EvalError,
    FormatError,
    ParseError,
    ShapeError,
    StageError,
    UndefinedOverlapError,
    VidcountError,
)
from .estimators import MaskletAssociator, PipelineResult, TemporalFilter, VideoCounter, run_pipeline
from .filtering import FilterVerdict, anchor_verdict, sweep_window, temporal_filter
from .geometry import (
    BinaryMask,
    BoundingBox,
    LossTerms,
    LossWeights,
    box_giou,
    box_iou,
    exemplar_loss_terms,
    mask_iou,
    rle_decode,
    rle_encode,
    total_loss,
)
from .metrics import (
    AP_RANGE_THRESHOLDS,
    EvalInput,
    ap_at_iou,
    ap_from_matches,
    ap_range,
    greedy_match,
    multiclass_mae_rmse,
    video_mae_rmse,
)
from .records import CAUSAL_MODES, Detection, GroundTruthTrack, Prompt, RunConfig, detections_by_frame
from .simulate import (
    NoiseConfig,
    OracleTracker,
    SceneConfig,
    ScenePack,
    SplitMix64,
    SyntheticSource,
    generate_scene,
    make_oracle_stack,
    mix_seed,
    oracle_track,
    prng_next,
    synth_detect,
)

__version__ = "0.1.0"

__all__ = [
    "AP_RANGE_THRESHOLDS",
    "BinaryMask",
    "BoundingBox",
    "CAUSAL_MODES",
    "ConfigError",
    "CountReport",
    "Detection",
    "EvalError",
    "EvalInput",
    "FilterVerdict",
    "FormatError",
    "FramePlan",
    "GroundTruthTrack",
    "LossTerms",
    "LossWeights",
    "Masklet",
    "MaskletAssociator",
    "NoiseConfig",
    "OracleTracker",
    "ParseError",
    "PipelineResult",
    "Prompt",
    "RunConfig",
    "SceneConfig",
    "ScenePack",
    "ShapeError",
    "SplitMix64",
    "Stage1Result",
    "StageError",
    "SyntheticSource",
    "TemporalFilter",
    "UndefinedOverlapError",
    "VideoCounter",
    "VidcountError",
    "anchor_verdict",
    "ap_at_iou",
    "ap_from_matches",
    "ap_range",
    "associate_and_count",
    "box_giou",
    "box_iou",
    "causal_count",
    "detections_by_frame",
    "exemplar_loss_terms",
    "generate_scene",
    "greedy_match",
    "make_oracle_stack",
    "mask_iou",
    "mix_seed",
    "multiclass_mae_rmse",
    "oracle_track",
    "plan_frames",
    "prng_next",
    "rle_decode",
    "rle_encode",
    "resolve_workers",
    "run_pipeline",
    "run_stage1",
    "sweep_window",
    "synth_detect",
    "temporal_filter",
    "total_loss",
    "video_mae_rmse",
    "__version__",
]
