"""Command-line interface: simulate, count, filter, sweep, evaluate, render."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .association import associate_and_count, causal_count
from .detection import plan_frames, resolve_workers, run_stage1
from .errors import ConfigError, VidcountError, exit_code_for
from .filtering import sweep_window, temporal_filter
from .interchange import (
    PredictionRecord,
    load_run_config,
    parse_detection_stream,
    parse_masklets,
    parse_predictions,
    parse_track_annotations,
    write_count_report,
    write_count_stream,
    write_detection_stream,
    write_masklets,
    write_track_annotations,
)
from .metrics import EvalInput, ap_from_matches, ap_range, greedy_match, multiclass_mae_rmse, video_mae_rmse
from .records import CAUSAL_MODES, Detection, RunConfig
from .render import render_overlay, sidecar_text, write_ppm
from .simulate import (
    NoiseConfig,
    OracleTracker,
    SceneConfig,
    ScenePack,
    generate_scene,
    synth_detect,
)


def _parse_hw(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return (int(h), int(w))
    except ValueError:
        raise ConfigError(f"expected <H>x<W>, got {text!r}") from None


def _parse_int_pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return (int(a), int(b))
    except ValueError:
        raise ConfigError(f"expected <A>:<B>, got {text!r}") from None


def _parse_float_pair(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(":")
        return (float(a), float(b))
    except ValueError:
        raise ConfigError(f"expected <LO>:<HI>, got {text!r}") from None


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _merged_config(args) -> RunConfig:
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as handle:
            config = load_run_config(handle)
    else:
        config = RunConfig()
    overrides = {}
    for attr, key in (
        ("fps", "target_fps"),
        ("window", "filter_window_w"),
        ("match_iou", "match_iou"),
        ("new_object_iou", "new_object_iou"),
        ("score_threshold", "score_threshold"),
        ("mode", "causal_mode"),
        ("seed", "seed"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return replace(config, **overrides) if overrides else config


def _read_detections(path: str) -> list[Detection]:
    with open(path, "r", encoding="utf-8") as handle:
        detections, warnings = parse_detection_stream(handle)
    if warnings:
        print(f"warning: {warnings} unknown key(s) ignored in {path}", file=sys.stderr)
    return detections


def _read_tracks(path: str):
    with open(path, "r", encoding="utf-8") as handle:
        tracks, warnings = parse_track_annotations(handle)
    if warnings:
        print(f"warning: {warnings} unknown key(s) ignored in {path}", file=sys.stderr)
    return tracks


def _scene_for(tracks, detections) -> ScenePack:
    last_track = max(max(t.per_frame) for t in tracks)
    last_det = max((d.frame for d in detections), default=0)
    return ScenePack.from_tracks(tracks, n_frames=max(last_track, last_det) + 1)


def _stage1_map(
    detections: list[Detection], config: RunConfig, source_fps: float | None
) -> tuple[dict[int, list[Detection]], int, int]:
    """Treat a detections file as Stage 1 output: threshold, drop empty masks,
    and (when a source rate is given) restrict to the planned frame subset."""
    present = sorted({d.frame for d in detections})
    if source_fps is not None:
        total = (present[-1] + 1) if present else 1
        plan = plan_frames(total, source_fps, config.target_fps)
        keys = list(plan.kept_indices)
    else:
        keys = present
    allowed = set(keys)
    per_frame: dict[int, list[Detection]] = {frame: [] for frame in keys}
    dropped_threshold = 0
    dropped_empty = 0
    for det in detections:
        if det.frame not in allowed:
            continue
        if det.score < config.score_threshold:
            dropped_threshold += 1
            continue
        if det.mask is None or det.mask.is_empty:
            dropped_empty += 1
            continue
        per_frame[det.frame].append(det)
    return per_frame, dropped_threshold, dropped_empty


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_text(path: str, writer) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        writer(handle)


def _noise_from_args(args) -> NoiseConfig:
    return NoiseConfig(
        p_miss=args.p_miss,
        fp_rate=args.fp_rate,
        fp_lifetime=args.fp_lifetime,
        jitter_sigma=args.jitter_sigma,
        id_switch_prob=args.id_switch_prob,
        seed=args.noise_seed,
    )


def _add_noise_args(parser) -> None:
    parser.add_argument("--p-miss", type=float, default=0.0)
    parser.add_argument("--fp-rate", type=float, default=0.0)
    parser.add_argument("--fp-lifetime", type=int, default=1)
    parser.add_argument("--jitter-sigma", type=float, default=0.0)
    parser.add_argument("--id-switch-prob", type=float, default=0.0)
    parser.add_argument("--noise-seed", type=int, default=0)


def _add_config_args(parser, with_mode: bool = True) -> None:
    parser.add_argument("--config", help="run config file (key=value lines)")
    parser.add_argument("--fps", type=float, default=None, help="target fps override")
    parser.add_argument("--window", type=int, default=None, help="temporal filter window w")
    parser.add_argument("--match-iou", type=float, default=None)
    parser.add_argument("--new-object-iou", type=float, default=None)
    parser.add_argument("--score-threshold", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    if with_mode:
        parser.add_argument("--mode", choices=CAUSAL_MODES, default=None)
    parser.add_argument("--workers", type=int, default=None)


def cmd_simulate(args) -> int:
    config = SceneConfig(
        grid_height=_parse_hw(args.grid)[0],
        grid_width=_parse_hw(args.grid)[1],
        n_frames=args.frames,
        n_objects=args.objects,
        shape=args.shape,
        size_range=_parse_float_pair(args.size_range),
        speed_range=_parse_float_pair(args.speed_range),
        entry_window=_parse_int_pair(args.entry_window) if args.entry_window else None,
        exit_window=_parse_int_pair(args.exit_window) if args.exit_window else None,
        allow_reentry=args.reentry,
        min_visible_run=args.min_visible_run,
        category=args.category,
        seed=args.seed if args.seed is not None else 0,
    )
    scene = generate_scene(config)
    out = _ensure_out(args.out)
    _write_text(os.path.join(out, "tracks.txt"), lambda h: write_track_annotations(scene.tracks, h))
    if args.emit_detections:
        source = synth_detect(scene, _noise_from_args(args))
        detections = [d for frame in sorted(source.detections()) for d in source.detections()[frame]]
        _write_text(
            os.path.join(out, "detections.txt"),
            lambda h: write_detection_stream(detections, h),
        )
    print(
        f"scene tracks={scene.unique_count} frames={scene.n_frames} "
        f"grid={scene.grid_height}x{scene.grid_width}"
    )
    return 0


def cmd_count(args) -> int:
    config = _merged_config(args)
    detections = _read_detections(args.detections)
    tracks = _read_tracks(args.tracks)
    scene = _scene_for(tracks, detections)
    tracker = OracleTracker(scene)
    per_frame, dropped_thr, dropped_empty = _stage1_map(detections, config, args.source_fps)
    total = sum(len(d) for d in per_frame.values())
    print(
        f"stage1 frames={len(per_frame)} detections={total} "
        f"dropped_threshold={dropped_thr} dropped_empty={dropped_empty}"
    )
    workers = resolve_workers(args.workers)
    out = _ensure_out(args.out) if args.out else None
    if config.causal_mode == "offline":
        filtered, verdicts = temporal_filter(
            per_frame, tracker, config.filter_window_w, config.match_iou, workers
        )
        kept = sum(len(d) for d in filtered.values())
        print(f"filter w={config.filter_window_w} kept={kept} removed={total - kept}")
        report, masklets = associate_and_count(filtered, tracker, config.new_object_iou)
        for note in report.errors:
            print(f"warning: {note}", file=sys.stderr)
        if out:
            _write_text(os.path.join(out, "report.txt"), lambda h: write_count_report(report, h))
            _write_text(os.path.join(out, "masklets.txt"), lambda h: write_masklets(masklets, h))
        print(f"global count={report.global_count}")
        return 0
    stream = causal_count(
        per_frame,
        tracker,
        mode=config.causal_mode,
        window_w=config.filter_window_w,
        match_iou=config.match_iou,
        new_object_iou=config.new_object_iou,
    )
    if out:
        _write_text(os.path.join(out, "stream.txt"), lambda h: write_count_stream(stream, h))
    final = stream[-1][1] if stream else 0
    print(f"global count={final}")
    return 0


def cmd_filter(args) -> int:
    config = _merged_config(args)
    detections = _read_detections(args.detections)
    tracks = _read_tracks(args.tracks)
    scene = _scene_for(tracks, detections)
    tracker = OracleTracker(scene)
    per_frame, _, _ = _stage1_map(detections, config, args.source_fps)
    workers = resolve_workers(args.workers)
    out = _ensure_out(args.out) if args.out else None
    if args.sweep:
        windows = _parse_int_list(args.sweep)
        results = sweep_window(per_frame, tracker, windows, config.match_iou, workers)
        lines = [
            f"sweep w={w} kept={entry.kept} removed={entry.removed}"
            for w, entry in sorted(results.items())
        ]
        for line in lines:
            print(line)
        if out:
            _write_text(
                os.path.join(out, "sweep.txt"),
                lambda h: h.write("\n".join(lines) + "\n"),
            )
        return 0
    filtered, verdicts = temporal_filter(
        per_frame, tracker, config.filter_window_w, config.match_iou, workers
    )
    total = sum(len(d) for d in per_frame.values())
    kept = sum(len(d) for d in filtered.values())
    print(f"filter w={config.filter_window_w} kept={kept} removed={total - kept}")
    if out:
        survivors = [d for f in sorted(filtered) for d in filtered[f]]
        _write_text(
            os.path.join(out, "filtered.txt"),
            lambda h: write_detection_stream(survivors, h),
        )

        def write_verdicts(handle):
            for v in verdicts:
                parts = [
                    "ver",
                    f"frame={v.frame}",
                    f"run={v.longest_run}",
                    f"kept={1 if v.kept else 0}",
                ]
                if v.detection_id:
                    parts.insert(1, f"id={v.detection_id}")
                if v.error:
                    escaped = v.error.replace("\\", "\\\\").replace('"', '\\"')
                    parts.append(f'error="{escaped}"')
                handle.write(" ".join(parts) + "\n")

        _write_text(os.path.join(out, "verdicts.txt"), write_verdicts)
    return 0


def cmd_sweep_window(args) -> int:
    config = _merged_config(args)
    detections = _read_detections(args.detections)
    tracks = _read_tracks(args.tracks)
    scene = _scene_for(tracks, detections)
    tracker = OracleTracker(scene)
    per_frame, _, _ = _stage1_map(detections, config, args.source_fps)
    workers = resolve_workers(args.workers)
    total = sum(len(d) for d in per_frame.values())
    lines = []
    for w in _parse_int_list(args.windows):
        filtered, _ = temporal_filter(per_frame, tracker, w, config.match_iou, workers)
        kept = sum(len(d) for d in filtered.values())
        report, _ = associate_and_count(filtered, tracker, config.new_object_iou)
        err = abs(report.global_count - scene.unique_count)
        lines.append(
            f"sweep w={w} kept={kept} removed={total - kept} "
            f"count={report.global_count} err={err}"
        )
    for line in lines:
        print(line)
    if args.out:
        out = _ensure_out(args.out)
        _write_text(os.path.join(out, "sweep.txt"), lambda h: h.write("\n".join(lines) + "\n"))
    return 0


def cmd_sweep_fps(args) -> int:
    config = _merged_config(args)
    tracks = _read_tracks(args.tracks)
    scene = ScenePack.from_tracks(tracks)
    noise = _noise_from_args(args)
    source = synth_detect(scene, noise)
    tracker = OracleTracker(scene, noise, realization=source.realization)
    workers = resolve_workers(args.workers)
    lines = []
    for fps in _parse_float_list(args.fps_list):
        plan = plan_frames(scene.n_frames, args.source_fps, fps)
        stage1 = run_stage1(plan, source, source, None, config.score_threshold, workers)
        filtered, _ = temporal_filter(
            stage1.per_frame, tracker, config.filter_window_w, config.match_iou, workers
        )
        report, _ = associate_and_count(filtered, tracker, config.new_object_iou)
        err = abs(report.global_count - scene.unique_count)
        lines.append(
            f"sweep fps={fps:g} frames={len(plan.kept_indices)} "
            f"count={report.global_count} err={err}"
        )
    for line in lines:
        print(line)
    if args.out:
        out = _ensure_out(args.out)
        _write_text(os.path.join(out, "sweep.txt"), lambda h: h.write("\n".join(lines) + "\n"))
    return 0


def _stem(path: str) -> str:
    base = os.path.basename(path)
    return base.rsplit(".", 1)[0] if "." in base else base


def cmd_evaluate(args) -> int:
    with open(args.predictions, "r", encoding="utf-8") as handle:
        predictions, warnings = parse_predictions(handle)
    if warnings:
        print(
            f"warning: {warnings} unknown key(s) ignored in {args.predictions}",
            file=sys.stderr,
        )
    gt_overall: dict[str, int] = {}
    gt_by_category: dict[tuple[str, str], int] = {}
    first_tracks = None
    for path in args.tracks:
        tracks = _read_tracks(path)
        if first_tracks is None:
            first_tracks = tracks
        video = _stem(path)
        if video in gt_overall:
            raise ConfigError(f"two tracks files share the video id {video!r}")
        gt_overall[video] = len(tracks)
        for track in tracks:
            key = (video, track.category)
            gt_by_category[key] = gt_by_category.get(key, 0) + 1
    from .errors import EvalError

    pairs: list[EvalInput] = []
    if args.per_category:
        pred_map = {(p.video, p.category): p.count for p in predictions}
        if set(pred_map) != set(gt_by_category):
            missing = sorted(set(gt_by_category) - set(pred_map))
            extra = sorted(set(pred_map) - set(gt_by_category))
            raise EvalError(
                f"predictions do not line up with ground truth: missing={missing} extra={extra}"
            )
        for (video, category), actual in sorted(gt_by_category.items()):
            pairs.append(EvalInput(pred_map[(video, category)], actual, video, category))
        mae, rmse = multiclass_mae_rmse(pairs)
    else:
        pred_sum: dict[str, float] = {}
        for p in predictions:
            pred_sum[p.video] = pred_sum.get(p.video, 0.0) + p.count
        if set(pred_sum) != set(gt_overall):
            missing = sorted(set(gt_overall) - set(pred_sum))
            extra = sorted(set(pred_sum) - set(gt_overall))
            raise EvalError(
                f"predictions do not line up with ground truth: missing={missing} extra={extra}"
            )
        for video, actual in sorted(gt_overall.items()):
            pairs.append(EvalInput(pred_sum[video], actual, video))
        mae, rmse = video_mae_rmse(pairs)
    print(f"count n={len(pairs)} mae={mae:.6f} rmse={rmse:.6f}")
    if args.detections:
        detections = _read_detections(args.detections)
        scene = _scene_for(first_tracks, detections)
        matches = []
        n_gt = 0
        frames = sorted({d.frame for d in detections} | set(range(scene.n_frames)))
        from .simulate import _mask_box

        per_frame_dets: dict[int, list[Detection]] = {}
        for det in detections:
            per_frame_dets.setdefault(det.frame, []).append(det)
        for frame in frames:
            gt_boxes = [
                _mask_box(mask) for _, mask in scene.visible(frame) if not mask.is_empty
            ]
            n_gt += len(gt_boxes)
            scored = [(d.box, d.score) for d in per_frame_dets.get(frame, [])]
            matches.extend(greedy_match(scored, gt_boxes, 0.5))
        value = ap_from_matches(matches, n_gt)
        print(f"ap iou=0.5 value={value:.6f}")
    return 0


def cmd_render(args) -> int:
    with open(args.masklets, "r", encoding="utf-8") as handle:
        masklets, warnings = parse_masklets(handle)
    if warnings:
        print(f"warning: {warnings} unknown key(s) ignored in {args.masklets}", file=sys.stderr)
    if not masklets:
        raise ConfigError("no masklets to render")
    grid = _parse_hw(args.grid) if args.grid else None
    if args.frame is not None:
        frames = [args.frame]
    elif args.frames:
        a, b = _parse_int_pair(args.frames)
        frames = list(range(a, b + 1))
    else:
        spanned = sorted({f for m in masklets for f in m.per_frame})
        frames = list(range(spanned[0], spanned[-1] + 1)) if spanned else []
    out = _ensure_out(args.out)
    for frame in frames:
        overlay = render_overlay(masklets, frame, grid=grid)
        write_ppm(overlay, os.path.join(out, f"frame_{frame:06d}.ppm"))
        with open(
            os.path.join(out, f"frame_{frame:06d}.txt"), "w", encoding="utf-8", newline="\n"
        ) as handle:
            handle.write(sidecar_text(masklets, frame))
    print(f"render frames={len(frames)} out={out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidcount",
        description="Count distinct objects in videos by detection, temporal "
        "filtering, and masklet association.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a deterministic scene")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--objects", type=int, default=8)
    p.add_argument("--grid", default="96x128")
    p.add_argument("--shape", choices=("rect", "ellipse"), default="rect")
    p.add_argument("--size-range", default="8:16")
    p.add_argument("--speed-range", default="0.5:2.5")
    p.add_argument("--entry-window", default=None)
    p.add_argument("--exit-window", default=None)
    p.add_argument("--reentry", action="store_true")
    p.add_argument("--min-visible-run", type=int, default=1)
    p.add_argument("--category", default="object")
    p.add_argument("--emit-detections", action="store_true")
    _add_noise_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("count", help="run the full counting pipeline")
    p.add_argument("--detections", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--source-fps", type=float, default=None)
    p.add_argument("--out", default=None)
    _add_config_args(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("filter", help="run or sweep the temporal filter")
    p.add_argument("--detections", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--source-fps", type=float, default=None)
    p.add_argument("--sweep", default=None, help="comma-separated window sizes")
    p.add_argument("--out", default=None)
    _add_config_args(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sweep-window", help="count at several filter windows")
    p.add_argument("--detections", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--source-fps", type=float, default=None)
    p.add_argument("--out", default=None)
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep_window)

    p = sub.add_parser("sweep-fps", help="count at several sampling rates")
    p.add_argument("--tracks", required=True)
    p.add_argument("--source-fps", type=float, required=True)
    p.add_argument("--fps-list", required=True, help="comma-separated target rates")
    p.add_argument("--out", default=None)
    _add_noise_args(p)
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep_fps)

    p = sub.add_parser("evaluate", help="score predicted counts against tracks")
    p.add_argument("--predictions", required=True)
    p.add_argument("--tracks", nargs="+", required=True)
    p.add_argument("--per-category", action="store_true")
    p.add_argument("--detections", default=None, help="also compute detection AP")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="render masklets to PPM overlays")
    p.add_argument("--masklets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frame", type=int, default=None)
    p.add_argument("--frames", default=None, help="inclusive range A:B")
    p.add_argument("--grid", default=None)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VidcountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
