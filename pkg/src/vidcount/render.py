"""Overlay rendering of masklets to binary PPM (P6) images."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .association import Masklet
from .errors import ConfigError
from .simulate import SplitMix64


@dataclass
class OverlayFrame:
    """An RGB raster; pixels is a (height, width, 3) uint8 array."""

    height: int
    width: int
    pixels: np.ndarray

    @classmethod
    def blank(
        cls, height: int, width: int, color: tuple[int, int, int] = (0, 0, 0)
    ) -> OverlayFrame:
        pixels = np.empty((height, width, 3), dtype=np.uint8)
        pixels[:, :] = color
        return cls(height, width, pixels)

    def to_ppm_bytes(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.pixels.tobytes()


def color_for_id(masklet_id: int) -> tuple[int, int, int]:
    """Stable id-to-color mixing: the first splitmix64 output of the id seeds
    the three channels (low bytes), each floored at 0x40 to stay visible."""
    value = SplitMix64(masklet_id).next_u64()
    return (
        (value & 0xFF) | 0x40,
        ((value >> 8) & 0xFF) | 0x40,
        ((value >> 16) & 0xFF) | 0x40,
    )


def _grid_of(masklets: Sequence[Masklet]) -> tuple[int, int] | None:
    for masklet in masklets:
        for mask, _ in masklet.per_frame.values():
            return mask.grid
    return None


def visible_masklets(masklets: Sequence[Masklet], frame: int) -> list[Masklet]:
    return [m for m in masklets if m.visible_at(frame)]


def render_overlay(
    masklets: Sequence[Masklet],
    frame: int,
    base: OverlayFrame | None = None,
    grid: tuple[int, int] | None = None,
) -> OverlayFrame:
    """Paint every masklet visible on `frame` over a base image.

    Masklets are painted in descending id so that lower ids land on top,
    matching the simulator's z-order (lower id in front). Painting overwrites
    the pixel with the masklet's color.
    """
    if base is None:
        if grid is None:
            grid = _grid_of(masklets)
        if grid is None:
            raise ConfigError("render needs a base image or a grid size")
        base = OverlayFrame.blank(*grid)
    out = OverlayFrame(base.height, base.width, base.pixels.copy())
    for masklet in sorted(visible_masklets(masklets, frame), key=lambda m: -m.masklet_id):
        mask, _ = masklet.per_frame[frame]
        if mask.grid != (base.height, base.width):
            raise ConfigError(
                f"masklet {masklet.masklet_id} grid {mask.grid} does not match the canvas"
            )
        out.pixels[mask.dense] = color_for_id(masklet.masklet_id)
    return out


def sidecar_text(masklets: Sequence[Masklet], frame: int) -> str:
    """Per-frame metadata: the visible count plus painted ids and colors."""
    visible = visible_masklets(masklets, frame)
    lines = [f"frame={frame} visible={len(visible)}"]
    for masklet in visible:
        r, g, b = color_for_id(masklet.masklet_id)
        lines.append(f"painted masklet={masklet.masklet_id} color={r:02x}{g:02x}{b:02x}")
    return "\n".join(lines) + "\n"


def write_ppm(overlay: OverlayFrame, path: str) -> None:
    with open(path, "wb") as handle:
        handle.write(overlay.to_ppm_bytes())
