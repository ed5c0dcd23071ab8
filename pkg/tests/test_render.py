"""PPM overlay rendering with stable per-masklet colors."""

import numpy as np
import pytest

from vidcount import BinaryMask, ConfigError, Masklet, rle_encode
from vidcount.render import (
    OverlayFrame,
    color_for_id,
    render_overlay,
    sidecar_text,
    visible_masklets,
    write_ppm,
)

GRID = (6, 8)


def box_mask(r0, c0, h, w):
    array = np.zeros(GRID, dtype=bool)
    array[r0 : r0 + h, c0 : c0 + w] = True
    return rle_encode(array)


def masklet(mid, frame_masks):
    per_frame = {f: (m, True) for f, m in frame_masks.items()}
    return Masklet(mid, min(frame_masks), "object", per_frame)


def test_color_golden_values():
    assert color_for_id(0) == (239, 205, 93)
    assert color_for_id(1) == (193, 92, 66)
    assert color_for_id(2) == (206, 86, 215)
    assert color_for_id(0) == color_for_id(0)
    for mid in range(64):
        color = color_for_id(mid)
        assert all(64 <= channel <= 255 for channel in color)


def test_overlay_frame_ppm_bytes():
    overlay = OverlayFrame.blank(4, 5)
    data = overlay.to_ppm_bytes()
    assert data.startswith(b"P6\n5 4\n255\n")
    assert len(data) == len(b"P6\n5 4\n255\n") + 4 * 5 * 3


def test_render_overlay_paints_lower_ids_on_top():
    a = masklet(0, {1: box_mask(0, 0, 3, 3)})
    b = masklet(1, {1: box_mask(1, 1, 3, 3)})
    overlay = render_overlay([a, b], 1)
    assert (overlay.height, overlay.width) == GRID
    pixels = overlay.pixels
    assert tuple(pixels[0, 0]) == color_for_id(0)
    assert tuple(pixels[3, 3]) == color_for_id(1)
    # the contested pixel goes to the lower id
    assert tuple(pixels[1, 1]) == color_for_id(0)
    # background stays black
    assert tuple(pixels[5, 7]) == (0, 0, 0)


def test_render_overlay_absent_frames_and_grid():
    a = masklet(0, {2: box_mask(0, 0, 2, 2)})
    overlay = render_overlay([a], 5, grid=GRID)
    assert not overlay.pixels.any()
    with pytest.raises(ConfigError):
        render_overlay([], 0)
    empty_only = Masklet(0, 0, "object", {0: (BinaryMask.empty(*GRID), False)})
    overlay = render_overlay([empty_only], 0)
    assert (overlay.height, overlay.width) == GRID


def test_render_overlay_over_base():
    base = OverlayFrame.blank(*GRID)
    base.pixels[:, :] = (9, 9, 9)
    a = masklet(0, {0: box_mask(0, 0, 1, 1)})
    overlay = render_overlay([a], 0, base=base)
    assert tuple(overlay.pixels[0, 0]) == color_for_id(0)
    assert tuple(overlay.pixels[4, 4]) == (9, 9, 9)


def test_visible_masklets_and_sidecar():
    a = masklet(0, {1: box_mask(0, 0, 2, 2), 2: box_mask(0, 0, 2, 2)})
    b = masklet(1, {2: box_mask(3, 3, 2, 2)})
    assert [m.masklet_id for m in visible_masklets([a, b], 1)] == [0]
    assert [m.masklet_id for m in visible_masklets([a, b], 2)] == [0, 1]
    text = sidecar_text([a, b], 2)
    lines = text.splitlines()
    assert lines[0] == "frame=2 visible=2"
    assert lines[1] == "painted masklet=0 color=efcd5d"
    assert lines[2] == "painted masklet=1 color=c15c42"


def test_write_ppm(tmp_path):
    overlay = render_overlay([masklet(0, {0: box_mask(1, 1, 2, 2)})], 0)
    path = tmp_path / "frame.ppm"
    write_ppm(overlay, str(path))
    data = path.read_bytes()
    assert data == overlay.to_ppm_bytes()
