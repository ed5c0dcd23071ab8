"""Line-based readers and writers for the on-disk interchange formats.

One record per line, `key=value` fields separated by single spaces. String
fields that may contain spaces (`label`, `category`, `text`) are double-quoted
with backslash escapes; ids are bare tokens. Blank lines and lines starting
with `#` are skipped. Unknown keys inside a known record are ignored and
counted as warnings; anything else malformed raises ParseError with the
1-based line number.
"""

from __future__ import annotations

import io
import re
from typing import Iterable, Iterator, NamedTuple, Sequence, TextIO

from .association import CountReport, Masklet
from .errors import ConfigError, FormatError, ParseError
from .geometry import BinaryMask, BoundingBox
from .records import BARE_ID_RE, Detection, GroundTruthTrack, RunConfig

_INT_RE = re.compile(r"[+-]?\d+\Z")
_MASK_RE = re.compile(r"(\d+)x(\d+):([0-9][0-9,]*)\Z")


def _lines(stream: Iterable[str] | TextIO) -> Iterator[tuple[int, str]]:
    for number, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield number, line


def _tokenize(line: str, number: int) -> list[str]:
    tokens: list[str] = []
    buf: list[str] = []
    quoted = False
    i = 0
    while i < len(line):
        ch = line[i]
        if quoted:
            if ch == "\\":
                if i + 1 >= len(line):
                    raise ParseError("dangling escape inside quoted string", number)
                buf.append(ch)
                buf.append(line[i + 1])
                i += 2
                continue
            if ch == '"':
                quoted = False
            buf.append(ch)
        elif ch == '"':
            quoted = True
            buf.append(ch)
        elif ch == " ":
            if buf:
                tokens.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
        i += 1
    if quoted:
        raise ParseError("unterminated quoted string", number)
    if buf:
        tokens.append("".join(buf))
    return tokens


def _fields(tokens: Sequence[str], number: int) -> dict[str, str]:
    fields: dict[str, str] = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise ParseError(f"expected key=value, got {token!r}", number)
        if key in fields:
            raise ParseError(f"duplicate key {key!r}", number)
        fields[key] = value
    return fields


def _parse_int(key: str, value: str, number: int) -> int:
    if not _INT_RE.match(value):
        raise ParseError(f"{key} must be an integer, got {value!r}", number)
    return int(value)


def _parse_float(key: str, value: str, number: int) -> float:
    try:
        parsed = float(value)
    except ValueError:
        raise ParseError(f"{key} must be a number, got {value!r}", number) from None
    if parsed != parsed or parsed in (float("inf"), float("-inf")):
        raise ParseError(f"{key} must be finite, got {value!r}", number)
    return parsed


def _parse_quoted(key: str, value: str, number: int) -> str:
    if len(value) < 2 or not value.startswith('"') or not value.endswith('"'):
        raise ParseError(f'{key} must be a quoted string, got {value!r}', number)
    body = value[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if i + 1 >= len(body) or body[i + 1] not in ('"', "\\"):
                raise ParseError(f"bad escape in {key}", number)
            out.append(body[i + 1])
            i += 2
            continue
        if ch == '"':
            raise ParseError(f"unescaped quote inside {key}", number)
        out.append(ch)
        i += 1
    return "".join(out)


def _parse_bare_id(key: str, value: str, number: int) -> str:
    if not BARE_ID_RE.match(value):
        raise ParseError(f"{key} must be a bare token, got {value!r}", number)
    return value


def _parse_mask(value: str, number: int) -> BinaryMask:
    match = _MASK_RE.match(value)
    if not match:
        raise ParseError(f"mask must look like <h>x<w>:<c0,c1,...>, got {value!r}", number)
    height, width = int(match.group(1)), int(match.group(2))
    counts = match.group(3).split(",")
    try:
        runs = tuple(int(c) for c in counts)
    except ValueError:
        raise ParseError(f"mask run counts must be integers, got {value!r}", number) from None
    try:
        return BinaryMask(height, width, runs)
    except FormatError as exc:
        raise ParseError(str(exc), number) from None


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _format_mask(mask: BinaryMask) -> str:
    counts = ",".join(str(r) for r in mask.runs)
    return f"{mask.grid_height}x{mask.grid_width}:{counts}"


def _float_repr(value: float) -> str:
    return repr(float(value))


class ParsedDetections(NamedTuple):
    detections: list[Detection]
    warnings: int


class ParsedTracks(NamedTuple):
    tracks: list[GroundTruthTrack]
    warnings: int


class ParsedMasklets(NamedTuple):
    masklets: list[Masklet]
    warnings: int


class PredictionRecord(NamedTuple):
    video: str
    category: str
    count: float


class ParsedPredictions(NamedTuple):
    predictions: list[PredictionRecord]
    warnings: int


_DET_KEYS = {"frame", "x", "y", "w", "h", "score", "label", "mask", "id"}


def parse_detection_stream(stream: Iterable[str] | TextIO) -> ParsedDetections:
    """Parse `det ...` lines; returns detections in file order plus a warning count."""
    detections: list[Detection] = []
    warnings = 0
    seen_ids: dict[str, int] = {}
    grid: tuple[int, int] | None = None
    for number, line in _lines(stream):
        tokens = _tokenize(line, number)
        if tokens[0] != "det":
            raise ParseError(f"expected 'det' record, got {tokens[0]!r}", number)
        fields = _fields(tokens[1:], number)
        for key in list(fields):
            if key not in _DET_KEYS:
                warnings += 1
                del fields[key]
        for key in ("frame", "x", "y", "w", "h", "score", "label"):
            if key not in fields:
                raise ParseError(f"missing required key {key!r}", number)
        mask = _parse_mask(fields["mask"], number) if "mask" in fields else None
        det_id = _parse_bare_id("id", fields["id"], number) if "id" in fields else ""
        try:
            det = Detection(
                frame=_parse_int("frame", fields["frame"], number),
                box=BoundingBox(
                    _parse_float("x", fields["x"], number),
                    _parse_float("y", fields["y"], number),
                    _parse_float("w", fields["w"], number),
                    _parse_float("h", fields["h"], number),
                ),
                score=_parse_float("score", fields["score"], number),
                label=_parse_quoted("label", fields["label"], number),
                mask=mask,
                id=det_id,
            )
        except FormatError as exc:
            raise ParseError(str(exc), number) from None
        if mask is not None:
            if grid is None:
                grid = mask.grid
            elif mask.grid != grid:
                raise ParseError(f"mask grid {mask.grid} differs from {grid}", number)
        if det_id:
            if det_id in seen_ids:
                raise ParseError(
                    f"duplicate detection id {det_id!r} (first at line {seen_ids[det_id]})",
                    number,
                )
            seen_ids[det_id] = number
        detections.append(det)
    return ParsedDetections(detections, warnings)


def write_detection_stream(detections: Iterable[Detection], stream: TextIO) -> None:
    for det in detections:
        parts = [
            "det",
            f"frame={det.frame}",
            f"x={_float_repr(det.box.x_min)}",
            f"y={_float_repr(det.box.y_min)}",
            f"w={_float_repr(det.box.width)}",
            f"h={_float_repr(det.box.height)}",
            f"score={_float_repr(det.score)}",
            f"label={_quote(det.label)}",
        ]
        if det.mask is not None:
            parts.append(f"mask={_format_mask(det.mask)}")
        if det.id:
            parts.append(f"id={det.id}")
        stream.write(" ".join(parts) + "\n")


_TRK_KEYS = {"id", "category", "frame", "mask"}


def parse_track_annotations(stream: Iterable[str] | TextIO) -> ParsedTracks:
    """Parse `trk ...` lines into tracks ordered by first appearance."""
    warnings = 0
    order: list[str] = []
    categories: dict[str, str] = {}
    frames: dict[str, dict[int, BinaryMask]] = {}
    grid: tuple[int, int] | None = None
    for number, line in _lines(stream):
        tokens = _tokenize(line, number)
        if tokens[0] != "trk":
            raise ParseError(f"expected 'trk' record, got {tokens[0]!r}", number)
        fields = _fields(tokens[1:], number)
        for key in list(fields):
            if key not in _TRK_KEYS:
                warnings += 1
                del fields[key]
        for key in _TRK_KEYS:
            if key not in fields:
                raise ParseError(f"missing required key {key!r}", number)
        track_id = _parse_bare_id("id", fields["id"], number)
        category = _parse_quoted("category", fields["category"], number)
        frame = _parse_int("frame", fields["frame"], number)
        mask = _parse_mask(fields["mask"], number)
        if grid is None:
            grid = mask.grid
        elif mask.grid != grid:
            raise ParseError(f"mask grid {mask.grid} differs from {grid}", number)
        if track_id not in categories:
            categories[track_id] = category
            frames[track_id] = {}
            order.append(track_id)
        elif categories[track_id] != category:
            raise ParseError(
                f"track {track_id!r} has conflicting categories "
                f"{categories[track_id]!r} and {category!r}",
                number,
            )
        if frame in frames[track_id]:
            raise ParseError(f"track {track_id!r} repeats frame {frame}", number)
        frames[track_id][frame] = mask
    tracks = []
    for track_id in order:
        try:
            tracks.append(GroundTruthTrack(track_id, categories[track_id], frames[track_id]))
        except FormatError as exc:
            raise ParseError(str(exc)) from None
    return ParsedTracks(tracks, warnings)


def write_track_annotations(tracks: Iterable[GroundTruthTrack], stream: TextIO) -> None:
    for track in tracks:
        for frame in track.frames:
            stream.write(
                f"trk id={track.track_id} category={_quote(track.category)} "
                f"frame={frame} mask={_format_mask(track.per_frame[frame])}\n"
            )


_CONFIG_KEYS = {
    "target_fps": float,
    "filter_window_w": int,
    "match_iou": float,
    "new_object_iou": float,
    "score_threshold": float,
    "causal_mode": str,
    "seed": int,
}


def load_run_config(stream: Iterable[str] | TextIO) -> RunConfig:
    """Read `key=value` lines into a RunConfig; unknown or repeated keys are errors."""
    values: dict[str, object] = {}
    for number, line in _lines(stream):
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {number}: expected key=value, got {line!r}")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {number}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {number}: duplicate config key {key!r}")
        kind = _CONFIG_KEYS[key]
        try:
            if kind is int:
                if not _INT_RE.match(raw):
                    raise ValueError
                values[key] = int(raw)
            elif kind is float:
                values[key] = float(raw)
            else:
                values[key] = raw
        except ValueError:
            raise ConfigError(
                f"line {number}: bad value {raw!r} for config key {key!r}"
            ) from None
    return RunConfig(**values)


def dump_run_config(config: RunConfig, stream: TextIO) -> None:
    stream.write(f"target_fps={_float_repr(config.target_fps)}\n")
    stream.write(f"filter_window_w={config.filter_window_w}\n")
    stream.write(f"match_iou={_float_repr(config.match_iou)}\n")
    stream.write(f"new_object_iou={_float_repr(config.new_object_iou)}\n")
    stream.write(f"score_threshold={_float_repr(config.score_threshold)}\n")
    stream.write(f"causal_mode={config.causal_mode}\n")
    stream.write(f"seed={config.seed}\n")


_MLT_KEYS = {"id", "label", "birth", "frame", "present", "mask"}


def parse_masklets(stream: Iterable[str] | TextIO) -> ParsedMasklets:
    """Parse `mlt ...` lines into masklets ordered by id."""
    warnings = 0
    labels: dict[int, str] = {}
    births: dict[int, int] = {}
    per_frame: dict[int, dict[int, tuple[BinaryMask, bool]]] = {}
    for number, line in _lines(stream):
        tokens = _tokenize(line, number)
        if tokens[0] != "mlt":
            raise ParseError(f"expected 'mlt' record, got {tokens[0]!r}", number)
        fields = _fields(tokens[1:], number)
        for key in list(fields):
            if key not in _MLT_KEYS:
                warnings += 1
                del fields[key]
        for key in _MLT_KEYS:
            if key not in fields:
                raise ParseError(f"missing required key {key!r}", number)
        masklet_id = _parse_int("id", fields["id"], number)
        label = _parse_quoted("label", fields["label"], number)
        birth = _parse_int("birth", fields["birth"], number)
        frame = _parse_int("frame", fields["frame"], number)
        present_raw = fields["present"]
        if present_raw not in ("0", "1"):
            raise ParseError(f"present must be 0 or 1, got {present_raw!r}", number)
        mask = _parse_mask(fields["mask"], number)
        if masklet_id not in labels:
            labels[masklet_id] = label
            births[masklet_id] = birth
            per_frame[masklet_id] = {}
        elif labels[masklet_id] != label or births[masklet_id] != birth:
            raise ParseError(f"masklet {masklet_id} has conflicting label/birth", number)
        if frame in per_frame[masklet_id]:
            raise ParseError(f"masklet {masklet_id} repeats frame {frame}", number)
        per_frame[masklet_id][frame] = (mask, present_raw == "1")
    masklets = [
        Masklet(mid, births[mid], labels[mid], per_frame[mid]) for mid in sorted(labels)
    ]
    return ParsedMasklets(masklets, warnings)


def write_masklets(masklets: Iterable[Masklet], stream: TextIO) -> None:
    for masklet in masklets:
        for frame in sorted(masklet.per_frame):
            mask, present = masklet.per_frame[frame]
            stream.write(
                f"mlt id={masklet.masklet_id} label={_quote(masklet.label)} "
                f"birth={masklet.birth_frame} frame={frame} "
                f"present={1 if present else 0} mask={_format_mask(mask)}\n"
            )


def parse_count_report(stream: Iterable[str] | TextIO) -> CountReport:
    """Parse `vis`/`birth`/`global` lines back into a CountReport."""
    per_frame: dict[int, int] = {}
    births: list[tuple[int, int]] = []
    global_count: int | None = None
    for number, line in _lines(stream):
        tokens = _tokenize(line, number)
        fields = _fields(tokens[1:], number)
        if tokens[0] == "vis":
            frame = _parse_int("frame", fields["frame"], number)
            if frame in per_frame:
                raise ParseError(f"repeated vis frame {frame}", number)
            per_frame[frame] = _parse_int("count", fields["count"], number)
        elif tokens[0] == "birth":
            births.append(
                (
                    _parse_int("masklet", fields["masklet"], number),
                    _parse_int("frame", fields["frame"], number),
                )
            )
        elif tokens[0] == "global":
            if global_count is not None:
                raise ParseError("repeated global line", number)
            global_count = _parse_int("count", fields["count"], number)
        else:
            raise ParseError(f"expected vis/birth/global record, got {tokens[0]!r}", number)
    if global_count is None:
        raise ParseError("missing global count line")
    if global_count != len(births):
        raise ParseError(f"global count {global_count} != {len(births)} birth lines")
    return CountReport(
        per_frame_visible={f: per_frame[f] for f in sorted(per_frame)},
        births=births,
        global_count=global_count,
    )


def write_count_report(report: CountReport, stream: TextIO) -> None:
    for frame in sorted(report.per_frame_visible):
        stream.write(f"vis frame={frame} count={report.per_frame_visible[frame]}\n")
    for masklet_id, frame in report.births:
        stream.write(f"birth masklet={masklet_id} frame={frame}\n")
    stream.write(f"global count={report.global_count}\n")


def parse_count_stream(stream: Iterable[str] | TextIO) -> list[tuple[int, int]]:
    """Parse `cnt frame=<f> count=<n>` lines into (frame, count) pairs."""
    out: list[tuple[int, int]] = []
    for number, line in _lines(stream):
        tokens = _tokenize(line, number)
        if tokens[0] != "cnt":
            raise ParseError(f"expected 'cnt' record, got {tokens[0]!r}", number)
        fields = _fields(tokens[1:], number)
        out.append(
            (
                _parse_int("frame", fields["frame"], number),
                _parse_int("count", fields["count"], number),
            )
        )
    return out


def write_count_stream(points: Iterable[tuple[int, int]], stream: TextIO) -> None:
    for frame, count in points:
        stream.write(f"cnt frame={frame} count={count}\n")


_PRED_KEYS = {"video", "category", "count"}


def parse_predictions(stream: Iterable[str] | TextIO) -> ParsedPredictions:
    """Parse `pred video=<v> category="<c>" count=<n>` lines."""
    warnings = 0
    out: list[PredictionRecord] = []
    seen: set[tuple[str, str]] = set()
    for number, line in _lines(stream):
        tokens = _tokenize(line, number)
        if tokens[0] != "pred":
            raise ParseError(f"expected 'pred' record, got {tokens[0]!r}", number)
        fields = _fields(tokens[1:], number)
        for key in list(fields):
            if key not in _PRED_KEYS:
                warnings += 1
                del fields[key]
        for key in _PRED_KEYS:
            if key not in fields:
                raise ParseError(f"missing required key {key!r}", number)
        record = PredictionRecord(
            video=_parse_bare_id("video", fields["video"], number),
            category=_parse_quoted("category", fields["category"], number),
            count=_parse_float("count", fields["count"], number),
        )
        key = (record.video, record.category)
        if key in seen:
            raise ParseError(f"duplicate prediction for {key}", number)
        seen.add(key)
        out.append(record)
    return ParsedPredictions(out, warnings)


def write_predictions(predictions: Iterable[PredictionRecord], stream: TextIO) -> None:
    for record in predictions:
        count = int(record.count) if float(record.count).is_integer() else record.count
        stream.write(
            f"pred video={record.video} category={_quote(record.category)} count={count}\n"
        )


def read_text_records(path: str, parser):
    """Open a file and apply one of the parse_* functions to it."""
    with io.open(path, "r", encoding="utf-8") as handle:
        return parser(handle)
