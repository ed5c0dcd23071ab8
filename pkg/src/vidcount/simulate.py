"""Deterministic scene synthesis, noisy detection synthesis, and oracle tracking.

Everything here is a pure function of the configs and their seeds: generation
draws from one splitmix64 stream in a fixed order, the noise realization is
precomputed frame by frame at construction, and the oracle tracker derives any
per-anchor randomness from stable keys rather than call order. Rerunning any of
it with the same inputs reproduces identical bytes, regardless of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, StageError
from .geometry import BinaryMask, BoundingBox, mask_iou, rle_encode
from .records import GroundTruthTrack
from .validation import check_fraction, check_int, check_nonnegative, check_range_pair

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_SALT_SWITCH = 0x1D872B41C9D2A7B5


def prng_next(state: int) -> tuple[int, int]:
    """One splitmix64 step: (state + gamma, mixed output), both 64-bit."""
    state = (state + _GAMMA) & MASK64
    z = state
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return state, z


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed, order-sensitively."""
    h = 0
    for part in parts:
        _, h = prng_next(h ^ (part & MASK64))
    return h


class SplitMix64:
    """splitmix64 stream with the small samplers the simulator needs."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state, value = prng_next(self.state)
        return value

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ConfigError(f"randint needs lo <= hi, got ({lo}, {hi})")
        return lo + self.next_u64() % (hi - lo + 1)

    def chance(self, p: float) -> bool:
        return self.random() < p

    def gauss(self, sigma: float) -> float:
        u1 = 1.0 - self.random()
        u2 = self.random()
        return sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam: float) -> int:
        """Knuth's multiplication method; intended for small rates."""
        if lam <= 0:
            return 0
        limit = math.exp(-lam)
        count = 0
        product = 1.0
        while True:
            product *= self.random()
            if product <= limit:
                return count
            count += 1


@dataclass(frozen=True)
class SceneConfig:
    """Knobs for deterministic scene synthesis."""

    grid_height: int = 96
    grid_width: int = 128
    n_frames: int = 30
    n_objects: int = 8
    shape: str = "rect"
    size_range: tuple[float, float] = (8.0, 16.0)
    speed_range: tuple[float, float] = (0.5, 2.5)
    entry_window: tuple[int, int] | None = None
    exit_window: tuple[int, int] | None = None
    allow_reentry: bool = False
    min_visible_run: int = 1
    category: str = "object"
    seed: int = 0
    max_place_attempts: int = 200

    def __post_init__(self):
        check_int("grid_height", self.grid_height, minimum=4)
        check_int("grid_width", self.grid_width, minimum=4)
        check_int("n_frames", self.n_frames, minimum=1)
        check_int("n_objects", self.n_objects, minimum=0)
        if self.n_objects > 999:
            raise ConfigError("n_objects must be <= 999")
        if self.shape not in ("rect", "ellipse"):
            raise ConfigError(f"shape must be rect or ellipse, got {self.shape!r}")
        lo, hi = check_range_pair("size_range", self.size_range)
        if lo < 2.0:
            raise ConfigError("size_range lower bound must be >= 2 pixels")
        if hi > min(self.grid_height, self.grid_width) - 1:
            raise ConfigError("size_range upper bound must leave room inside the grid")
        slo, _ = check_range_pair("speed_range", self.speed_range)
        if slo < 0:
            raise ConfigError("speed_range must be non-negative")
        entry = self.entry_window if self.entry_window is not None else (0, 0)
        exit_ = (
            self.exit_window
            if self.exit_window is not None
            else (self.n_frames - 1, self.n_frames - 1)
        )
        for name, window in (("entry_window", entry), ("exit_window", exit_)):
            a, b = window
            check_int(f"{name}[0]", a, minimum=0)
            check_int(f"{name}[1]", b, minimum=a)
            if b >= self.n_frames:
                raise ConfigError(f"{name} must lie inside [0, {self.n_frames})")
        if entry[1] > exit_[0]:
            raise ConfigError("entry_window must end at or before exit_window begins")
        check_int("min_visible_run", self.min_visible_run, minimum=1)
        if exit_[0] - entry[1] + 1 < self.min_visible_run:
            raise ConfigError(
                "shortest possible presence is below min_visible_run; widen the windows"
            )
        if not self.category:
            raise ConfigError("category must be non-empty")
        check_int("max_place_attempts", self.max_place_attempts, minimum=1)
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "entry_window", (int(entry[0]), int(entry[1])))
        object.__setattr__(self, "exit_window", (int(exit_[0]), int(exit_[1])))


@dataclass(frozen=True)
class NoiseConfig:
    """Detector and tracker corruption applied on top of a clean scene."""

    p_miss: float = 0.0
    fp_rate: float = 0.0
    fp_lifetime: int = 1
    jitter_sigma: float = 0.0
    id_switch_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        check_fraction("p_miss", self.p_miss)
        check_nonnegative("fp_rate", self.fp_rate)
        check_int("fp_lifetime", self.fp_lifetime, minimum=1)
        check_nonnegative("jitter_sigma", self.jitter_sigma)
        check_fraction("id_switch_prob", self.id_switch_prob)
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


def _reflect(origin: float, velocity: float, dt: float, limit: float) -> float:
    """Fold origin + velocity*dt into [0, limit] by mirror reflection."""
    if limit <= 0:
        return 0.0
    period = 2.0 * limit
    q = (origin + velocity * dt) % period
    return q if q <= limit else period - q


def _raster_span(lo: float, hi: float, limit: int) -> tuple[int, int]:
    """Half-open pixel index range whose centers fall inside [lo, hi)."""
    a = max(0, math.ceil(lo - 0.5))
    b = min(limit, math.ceil(hi - 0.5))
    return a, b


def rasterize_shape(
    shape: str, box: BoundingBox, grid_height: int, grid_width: int
) -> tuple[int, int, np.ndarray] | None:
    """Pixel-center rasterization; returns (row0, col0, local bool array) or None."""
    r0, r1 = _raster_span(box.y_min, box.y_max, grid_height)
    c0, c1 = _raster_span(box.x_min, box.x_max, grid_width)
    if r0 >= r1 or c0 >= c1:
        return None
    if shape == "rect":
        return r0, c0, np.ones((r1 - r0, c1 - c0), dtype=bool)
    cy, cx = box.y_min + box.height / 2.0, box.x_min + box.width / 2.0
    ry, rx = box.height / 2.0, box.width / 2.0
    rows = (np.arange(r0, r1, dtype=float) + 0.5 - cy) / ry
    cols = (np.arange(c0, c1, dtype=float) + 0.5 - cx) / rx
    local = rows[:, None] ** 2 + cols[None, :] ** 2 <= 1.0
    if not local.any():
        return None
    return r0, c0, local


def _full_mask(
    window: tuple[int, int, np.ndarray], grid_height: int, grid_width: int
) -> BinaryMask:
    r0, c0, local = window
    dense = np.zeros((grid_height, grid_width), dtype=bool)
    dense[r0 : r0 + local.shape[0], c0 : c0 + local.shape[1]] = local
    return rle_encode(dense)


def _mask_box(mask: BinaryMask) -> BoundingBox | None:
    bounds = mask.bbox
    if bounds is None:
        return None
    r0, c0, r1, c1 = bounds
    return BoundingBox(float(c0), float(r0), float(c1 - c0), float(r1 - r0))


def _boxes_disjoint(a: BoundingBox, b: BoundingBox) -> bool:
    return (
        a.x_max <= b.x_min or b.x_max <= a.x_min or a.y_max <= b.y_min or b.y_max <= a.y_min
    )


class _PlacedObject:
    __slots__ = ("index", "track_id", "width", "height", "entry", "segments", "x0", "y0",
                 "vx", "vy", "shape", "windows")

    def __init__(self, index, track_id, width, height, entry, segments, x0, y0, vx, vy, shape):
        self.index = index
        self.track_id = track_id
        self.width = width
        self.height = height
        self.entry = entry
        self.segments = segments
        self.x0 = x0
        self.y0 = y0
        self.vx = vx
        self.vy = vy
        self.shape = shape
        self.windows: dict[int, tuple[int, int, np.ndarray]] = {}

    def present(self, frame: int) -> bool:
        return any(start <= frame <= end for start, end in self.segments)

    def frames(self) -> list[int]:
        return [f for start, end in self.segments for f in range(start, end + 1)]

    def box(self, frame: int, grid_height: int, grid_width: int) -> BoundingBox:
        dt = float(frame - self.entry)
        x = _reflect(self.x0, self.vx, dt, grid_width - self.width)
        y = _reflect(self.y0, self.vy, dt, grid_height - self.height)
        return BoundingBox(x, y, self.width, self.height)


@dataclass
class ScenePack:
    """A synthesized (or file-loaded) scene: tracks plus derived per-frame views."""

    grid_height: int
    grid_width: int
    n_frames: int
    tracks: list[GroundTruthTrack]
    config: SceneConfig | None = None
    boxes: dict[tuple[str, int], BoundingBox] = field(default_factory=dict)

    def __post_init__(self):
        per_frame: dict[int, list[tuple[str, BinaryMask]]] = {}
        for track in self.tracks:
            if track.grid != (self.grid_height, self.grid_width):
                raise ConfigError(
                    f"track {track.track_id!r} grid {track.grid} does not match the scene"
                )
            for frame, mask in track.per_frame.items():
                if frame >= self.n_frames:
                    raise ConfigError(
                        f"track {track.track_id!r} frame {frame} is outside the video"
                    )
                per_frame.setdefault(frame, []).append((track.track_id, mask))
        self._per_frame = {f: per_frame.get(f, []) for f in range(self.n_frames)}

    @classmethod
    def from_tracks(cls, tracks: Sequence[GroundTruthTrack], n_frames: int | None = None) -> ScenePack:
        if not tracks:
            raise ConfigError("cannot build a scene from zero tracks without dimensions")
        grid = tracks[0].grid
        last = max(max(t.per_frame) for t in tracks)
        boxes: dict[tuple[str, int], BoundingBox] = {}
        for track in tracks:
            for frame, mask in track.per_frame.items():
                box = _mask_box(mask)
                if box is not None:
                    boxes[(track.track_id, frame)] = box
        return cls(
            grid_height=grid[0],
            grid_width=grid[1],
            n_frames=n_frames if n_frames is not None else last + 1,
            tracks=list(tracks),
            boxes=boxes,
        )

    @property
    def grid(self) -> tuple[int, int]:
        return (self.grid_height, self.grid_width)

    @property
    def unique_count(self) -> int:
        return len(self.tracks)

    @property
    def category(self) -> str:
        if self.config is not None:
            return self.config.category
        return self.tracks[0].category if self.tracks else "object"

    def visible(self, frame: int) -> list[tuple[str, BinaryMask]]:
        """(track_id, mask) pairs visible on one frame, in track order."""
        if not 0 <= frame < self.n_frames:
            raise ConfigError(f"frame {frame} outside [0, {self.n_frames})")
        return self._per_frame[frame]

    def box_for(self, track_id: str, frame: int) -> BoundingBox | None:
        return self.boxes.get((track_id, frame))


def _candidate_visibility_ok(
    candidate: _PlacedObject, placed: Sequence[_PlacedObject], config: SceneConfig
) -> bool:
    grid_h, grid_w = config.grid_height, config.grid_width
    # Entry frames must be box-disjoint from everything already in the scene so
    # each (re)appearance is fully visible and immediately detectable.
    for start, _ in candidate.segments:
        cbox = candidate.box(start, grid_h, grid_w)
        for other in placed:
            if other.present(start) and not _boxes_disjoint(
                cbox, other.box(start, grid_h, grid_w)
            ):
                return False
    visible_frames: list[int] = []
    for frame in candidate.frames():
        window = candidate.windows.get(frame)
        if window is None:
            return False
        r0, c0, local = window
        remaining = local
        for other in placed:
            if not other.present(frame):
                continue
            o_window = other.windows[frame]
            orow0, ocol0, olocal = o_window
            rr0 = max(r0, orow0)
            rr1 = min(r0 + local.shape[0], orow0 + olocal.shape[0])
            cc0 = max(c0, ocol0)
            cc1 = min(c0 + local.shape[1], ocol0 + olocal.shape[1])
            if rr0 >= rr1 or cc0 >= cc1:
                continue
            if remaining is local:
                remaining = local.copy()
            remaining[rr0 - r0 : rr1 - r0, cc0 - c0 : cc1 - c0] &= ~olocal[
                rr0 - orow0 : rr1 - orow0, cc0 - ocol0 : cc1 - ocol0
            ]
        if remaining.any():
            visible_frames.append(frame)
    if not visible_frames:
        return False
    runs: list[int] = []
    run = 1
    for previous, current in zip(visible_frames, visible_frames[1:]):
        if current == previous + 1:
            run += 1
        else:
            runs.append(run)
            run = 1
    runs.append(run)
    return min(runs) >= config.min_visible_run


def generate_scene(config: SceneConfig) -> ScenePack:
    """Synthesize a deterministic scene of moving, occluding objects.

    Objects are placed sequentially with rejection sampling: each must be
    box-disjoint from all earlier objects on its entry frames, and all of its
    post-occlusion visibility runs must span at least min_visible_run frames.
    Z-order follows track id (lower id occludes higher).
    """
    rng = SplitMix64(config.seed)
    grid_h, grid_w = config.grid_height, config.grid_width
    entry_lo, entry_hi = config.entry_window
    exit_lo, exit_hi = config.exit_window
    placed: list[_PlacedObject] = []
    for index in range(config.n_objects):
        accepted = False
        for _ in range(config.max_place_attempts):
            width = rng.uniform(*config.size_range)
            height = rng.uniform(*config.size_range)
            entry = rng.randint(entry_lo, entry_hi)
            exit_frame = rng.randint(exit_lo, exit_hi)
            span = exit_frame - entry + 1
            segments = [(entry, exit_frame)]
            if config.allow_reentry:
                wants = rng.chance(0.5)
                slack = span - 2 * config.min_visible_run
                if wants and slack >= 1:
                    gap = rng.randint(1, min(slack, 4))
                    first_len = rng.randint(
                        config.min_visible_run, span - config.min_visible_run - gap
                    )
                    segments = [
                        (entry, entry + first_len - 1),
                        (entry + first_len + gap, exit_frame),
                    ]
            x0 = rng.uniform(0.0, grid_w - width)
            y0 = rng.uniform(0.0, grid_h - height)
            speed = rng.uniform(*config.speed_range)
            angle = rng.uniform(0.0, 2.0 * math.pi)
            candidate = _PlacedObject(
                index,
                f"t{index:03d}",
                width,
                height,
                entry,
                segments,
                x0,
                y0,
                speed * math.cos(angle),
                speed * math.sin(angle),
                config.shape,
            )
            ok = True
            for frame in candidate.frames():
                window = rasterize_shape(
                    config.shape, candidate.box(frame, grid_h, grid_w), grid_h, grid_w
                )
                if window is None:
                    ok = False
                    break
                candidate.windows[frame] = window
            if ok and _candidate_visibility_ok(candidate, placed, config):
                placed.append(candidate)
                accepted = True
                break
        if not accepted:
            raise ConfigError(
                f"could not place object {index} within {config.max_place_attempts} attempts;"
                " the scene is too crowded for its constraints"
            )
    tracks: list[GroundTruthTrack] = []
    boxes: dict[tuple[str, int], BoundingBox] = {}
    visible_masks: dict[str, dict[int, BinaryMask]] = {obj.track_id: {} for obj in placed}
    for frame in range(config.n_frames):
        canvas = np.zeros((grid_h, grid_w), dtype=bool)
        for obj in placed:
            if not obj.present(frame):
                continue
            r0, c0, local = obj.windows[frame]
            view = canvas[r0 : r0 + local.shape[0], c0 : c0 + local.shape[1]]
            vis_local = local & ~view
            if vis_local.any():
                visible_masks[obj.track_id][frame] = _full_mask(
                    (r0, c0, vis_local), grid_h, grid_w
                )
                boxes[(obj.track_id, frame)] = obj.box(frame, grid_h, grid_w)
            view |= local
    for obj in placed:
        tracks.append(
            GroundTruthTrack(obj.track_id, config.category, visible_masks[obj.track_id])
        )
    return ScenePack(
        grid_height=grid_h,
        grid_width=grid_w,
        n_frames=config.n_frames,
        tracks=tracks,
        config=config,
        boxes=boxes,
    )


class _Emission(NamedTuple):
    origin: str
    box: BoundingBox
    score: float
    mask: BinaryMask
    label: str


@dataclass(frozen=True)
class FpEpisode:
    """One injected transient: a static box/mask alive for `lifetime` frames."""

    key: str
    start: int
    lifetime: int
    box: BoundingBox
    mask: BinaryMask
    scores: tuple[float, ...]

    def alive(self, frame: int) -> bool:
        return self.start <= frame < self.start + self.lifetime

    def mask_at(self, frame: int, empty: BinaryMask) -> tuple[BinaryMask, bool]:
        if self.alive(frame):
            return (self.mask, True)
        return (empty, False)


def _shift_mask(mask: BinaryMask, dy: int, dx: int) -> BinaryMask:
    if dy == 0 and dx == 0:
        return mask
    h, w = mask.grid
    dense = mask.dense
    out = np.zeros((h, w), dtype=bool)
    r_src0, r_src1 = max(0, -dy), h - max(0, dy)
    c_src0, c_src1 = max(0, -dx), w - max(0, dx)
    if r_src0 < r_src1 and c_src0 < c_src1:
        out[r_src0 + dy : r_src1 + dy, c_src0 + dx : c_src1 + dx] = dense[
            r_src0:r_src1, c_src0:c_src1
        ]
    return rle_encode(out)


class NoiseRealization:
    """The fully materialized noisy detector output for one (scene, noise) pair."""

    def __init__(self, scene: ScenePack, noise: NoiseConfig):
        self.scene = scene
        self.noise = noise
        self.episodes: list[FpEpisode] = []
        self.emissions: dict[int, list[_Emission]] = {}
        if scene.config is not None:
            fp_lo, fp_hi = scene.config.size_range
        else:
            fp_hi = max(3.0, min(scene.grid_height, scene.grid_width) / 8.0)
            fp_lo = max(2.0, fp_hi / 2.0)
        rng = SplitMix64(mix_seed(noise.seed, 0xFACADE))
        label = scene.category
        for frame in range(scene.n_frames):
            emitted: list[_Emission] = []
            for track_id, mask in scene.visible(frame):
                miss = rng.random() < noise.p_miss
                score = 0.5 + 0.5 * rng.random()
                jx = jy = 0.0
                if noise.jitter_sigma > 0:
                    jx = rng.gauss(noise.jitter_sigma)
                    jy = rng.gauss(noise.jitter_sigma)
                if miss:
                    continue
                box = scene.box_for(track_id, frame) or _mask_box(mask)
                box = BoundingBox(box.x_min + jx, box.y_min + jy, box.width, box.height)
                shifted = _shift_mask(mask, round(jy), round(jx))
                emitted.append(_Emission(track_id, box, score, shifted, label))
            if noise.fp_rate > 0:
                for _ in range(rng.poisson(noise.fp_rate)):
                    episode = self._place_fp(rng, frame, (fp_lo, fp_hi))
                    if episode is not None:
                        self.episodes.append(episode)
            for episode in self.episodes:
                if episode.alive(frame):
                    emitted.append(
                        _Emission(
                            episode.key,
                            episode.box,
                            episode.scores[frame - episode.start],
                            episode.mask,
                            label,
                        )
                    )
            self.emissions[frame] = emitted

    def _place_fp(
        self, rng: SplitMix64, frame: int, size_range: tuple[float, float]
    ) -> FpEpisode | None:
        scene = self.scene
        life = min(self.noise.fp_lifetime, scene.n_frames - frame)
        for _ in range(50):
            width = rng.uniform(*size_range)
            height = rng.uniform(*size_range)
            if width >= scene.grid_width or height >= scene.grid_height:
                continue
            box = BoundingBox(
                rng.uniform(0.0, scene.grid_width - width),
                rng.uniform(0.0, scene.grid_height - height),
                width,
                height,
            )
            clear = True
            for g in range(frame, frame + life):
                for _, gt_mask in scene.visible(g):
                    gt_box = _mask_box(gt_mask)
                    if gt_box is not None and not _boxes_disjoint(box, gt_box):
                        clear = False
                        break
                if not clear:
                    break
                for other in self.episodes:
                    if other.alive(g) and not _boxes_disjoint(box, other.box):
                        clear = False
                        break
                if not clear:
                    break
            if not clear:
                continue
            window = rasterize_shape("rect", box, scene.grid_height, scene.grid_width)
            if window is None:
                continue
            mask = _full_mask(window, scene.grid_height, scene.grid_width)
            scores = tuple(0.23 + 0.77 * rng.random() for _ in range(life))
            return FpEpisode(f"fp{len(self.episodes)}", frame, life, box, mask, scores)
        return None


class SyntheticSource:
    """DetectorInterface + SegmenterInterface over a noise realization."""

    def __init__(self, scene: ScenePack, noise: NoiseConfig | None = None,
                 realization: NoiseRealization | None = None):
        self.scene = scene
        self.noise = noise or NoiseConfig()
        self.realization = realization or NoiseRealization(scene, self.noise)
        self._mask_queues: dict[tuple, list[BinaryMask]] = {}
        for frame, emitted in self.realization.emissions.items():
            for emission in emitted:
                key = self._key(frame, emission.box)
                self._mask_queues.setdefault(key, []).append(emission.mask)
        self._queue_cursor: dict[tuple, int] = {}

    @staticmethod
    def _key(frame: int, box: BoundingBox) -> tuple:
        return (frame, box.x_min, box.y_min, box.width, box.height)

    def detect(self, frame: int, prompt=None) -> list[tuple[BoundingBox, float, str]]:
        return [
            (e.box, e.score, e.label) for e in self.realization.emissions.get(frame, [])
        ]

    def segment(self, frame: int, box: BoundingBox) -> BinaryMask:
        key = self._key(frame, box)
        queue = self._mask_queues.get(key)
        if queue is None:
            raise StageError(f"no synthetic mask recorded for frame {frame} box {box}")
        cursor = self._queue_cursor.get(key, 0) % len(queue)
        self._queue_cursor[key] = cursor + 1
        return queue[cursor]

    def detections(self) -> dict[int, list]:
        """Stage-1-equivalent detection map with origin-coded ids.

        Ids look like `t003.f12` (true object) or `fp7.f12` (transient), which
        lets tests classify survivors. Empty-mask emissions are omitted, the
        same way Stage 1 drops them.
        """
        from .records import Detection

        out: dict[int, list[Detection]] = {}
        for frame in range(self.scene.n_frames):
            dets = []
            for emission in self.realization.emissions.get(frame, []):
                if emission.mask.is_empty:
                    continue
                dets.append(
                    Detection(
                        frame,
                        emission.box,
                        emission.score,
                        emission.label,
                        emission.mask,
                        id=f"{emission.origin}.f{frame}",
                    )
                )
            out[frame] = dets
        return out


def synth_detect(scene: ScenePack, noise: NoiseConfig | None = None) -> SyntheticSource:
    """Noisy detector+segmenter for a scene (misses, jitter, transients)."""
    return SyntheticSource(scene, noise)


class OracleTracker:
    """Tracker that answers propagation queries from ground truth.

    An anchor mask is resolved once (memoized) to the ground-truth track with
    the highest overlap, ties to the lowest track id; failing that, to the
    false-positive episode it overlaps; failing that, it is treated as present
    only on its own anchor frame. Optional id switches corrupt track-resolved
    queries deterministically per (seed, anchor frame, track).
    """

    def __init__(self, scene: ScenePack, noise: NoiseConfig | None = None,
                 realization: NoiseRealization | None = None):
        self.scene = scene
        self.noise = noise or NoiseConfig()
        if realization is None and self.noise.fp_rate > 0:
            realization = NoiseRealization(scene, self.noise)
        self.realization = realization
        self._empty = BinaryMask.empty(scene.grid_height, scene.grid_width)
        self._cache: dict[tuple, tuple] = {}
        self._order = {track.track_id: i for i, track in enumerate(scene.tracks)}
        self._track_by_id = {track.track_id: track for track in scene.tracks}

    def _resolve(self, anchor_frame: int, anchor_mask: BinaryMask) -> tuple:
        key = (anchor_frame, anchor_mask.runs)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        best_id = None
        best = 0.0
        for track_id, mask in self.scene.visible(anchor_frame):
            value = mask_iou(anchor_mask, mask)
            if value <= 0.0:
                continue
            if best_id is None or value > best or (value == best and track_id < best_id):
                best = value
                best_id = track_id
        if best_id is not None:
            resolved = ("track", self._track_by_id[best_id])
        else:
            resolved = ("none", None)
            if self.realization is not None:
                fp_best = 0.0
                fp_pick = None
                for episode in self.realization.episodes:
                    if episode.alive(anchor_frame):
                        value = mask_iou(anchor_mask, episode.mask)
                        if value > fp_best:
                            fp_best = value
                            fp_pick = episode
                if fp_pick is not None and fp_best > 0:
                    resolved = ("fp", fp_pick)
        self._cache[key] = resolved
        return resolved

    def _nearest_other(self, frame: int, exclude: str, point: tuple[float, float]):
        best = None
        best_key = None
        for track_id, mask in self.scene.visible(frame):
            if track_id == exclude:
                continue
            cx, cy = _mask_box(mask).center
            key = ((cx - point[0]) ** 2 + (cy - point[1]) ** 2, track_id)
            if best_key is None or key < best_key:
                best_key = key
                best = track_id
        return self._track_by_id[best] if best is not None else None

    def propagate(
        self, anchor_frame: int, anchor_mask: BinaryMask, target_frames: Sequence[int]
    ) -> list[tuple[BinaryMask, bool]]:
        if anchor_mask.is_empty:
            raise StageError("cannot propagate an empty anchor mask")
        if not 0 <= anchor_frame < self.scene.n_frames:
            raise StageError(f"anchor frame {anchor_frame} outside the video")
        kind, payload = self._resolve(anchor_frame, anchor_mask)
        results: list[tuple[BinaryMask, bool]] = []
        if kind == "track":
            current: GroundTruthTrack = payload
            switch_rng = None
            if self.noise.id_switch_prob > 0:
                switch_rng = SplitMix64(
                    mix_seed(
                        self.noise.seed,
                        _SALT_SWITCH,
                        anchor_frame,
                        self._order[current.track_id],
                    )
                )
            reference = _mask_box(anchor_mask).center
            for frame in target_frames:
                if switch_rng is not None and switch_rng.chance(self.noise.id_switch_prob):
                    other = self._nearest_other(frame, current.track_id, reference)
                    if other is not None:
                        current = other
                mask = current.per_frame.get(frame)
                results.append((mask, True) if mask is not None else (self._empty, False))
            return results
        if kind == "fp":
            episode: FpEpisode = payload
            return [episode.mask_at(frame, self._empty) for frame in target_frames]
        return [
            (anchor_mask, True) if frame == anchor_frame else (self._empty, False)
            for frame in target_frames
        ]


def oracle_track(scene: ScenePack, noise: NoiseConfig | None = None) -> OracleTracker:
    """Ground-truth-backed tracker for a scene (optionally noise-aware)."""
    return OracleTracker(scene, noise)


def make_oracle_stack(
    scene: ScenePack, noise: NoiseConfig | None = None
) -> tuple[SyntheticSource, OracleTracker]:
    """Detector/segmenter and tracker sharing one noise realization."""
    source = SyntheticSource(scene, noise)
    tracker = OracleTracker(scene, source.noise, realization=source.realization)
    return source, tracker
