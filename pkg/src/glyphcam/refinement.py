"""Position-map refinement: each line's mask becomes the expanded convex hull of its glyphs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError, ValidationError
from .glyphs import POSITION_SIZE, label_map
from .polygon import convex_hull, expand_polygon, fill_convex_polygon

DEFAULT_EXPANSION = 1.2
# glyph coverage above this counts as foreground
GLYPH_THRESHOLD = 0.5


@dataclass(frozen=True)
class RefinementConfig:
    expansion: float = DEFAULT_EXPANSION

    def __post_init__(self):
        if not (np.isfinite(self.expansion) and self.expansion > 0):
            raise ValidationError(f"expansion must be positive, got {self.expansion}")


def foreground_centroid(mask) -> np.ndarray:
    """Mean (x, y) index of the non-zero pixels."""
    rows, cols = np.nonzero(np.asarray(mask))
    if rows.size == 0:
        raise EmptyRegionError("mask has no foreground pixels")
    return np.array([cols.mean(), rows.mean()])


def _pixel_square_corners(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Corners of the unit squares covered by pixels, keeping only each row's extremes."""
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    ends = np.r_[starts[1:], rows.size] - 1
    r = rows[starts].astype(np.float64)
    lo = cols[starts].astype(np.float64)
    hi = cols[ends].astype(np.float64) + 1
    return np.concatenate([
        np.stack([lo, r], 1), np.stack([lo, r + 1], 1),
        np.stack([hi, r], 1), np.stack([hi, r + 1], 1),
    ])


def line_hull(glyph_frame, region, scale: float = 0.5) -> np.ndarray | None:
    """Convex hull (in position-map coordinates) of glyph foreground inside ``region``.

    Foreground pixels are first snapped to the position grid (the position pixel
    holding each pixel centre), then the hull is taken over the corners of those
    position pixels. Hull edges therefore run along pixel boundaries and never
    through pixel centres, which keeps the rasterized area unbiased.
    Returns None when the region holds no foreground.
    """
    rows, cols = np.nonzero((np.asarray(glyph_frame) > GLYPH_THRESHOLD) & np.asarray(region, dtype=bool))
    if rows.size == 0:
        return None
    rows = np.floor((rows + 0.5) * scale).astype(np.int64)
    cols = np.floor((cols + 0.5) * scale).astype(np.int64)
    return convex_hull(_pixel_square_corners(rows, cols))


def refine_mask(glyph_frame, labels, n_lines: int, cfg: RefinementConfig = RefinementConfig(),
                size: int = POSITION_SIZE, fallback=None, names=None) -> np.ndarray:
    """Union over lines of the expanded glyph hulls, rasterized at ``size`` x ``size``.

    ``labels`` assigns glyph pixels to lines (value i + 1 for line i). Lines
    without glyph foreground raise EmptyRegionError unless ``fallback`` is
    given as a (mask, labels) pair at position resolution, in which case the
    line's pixels are copied from that mask.
    """
    glyph_frame = np.asarray(glyph_frame)
    scale = size / glyph_frame.shape[1]
    out = np.zeros((size, size), dtype=np.uint8)
    for i in range(n_lines):
        hull = line_hull(glyph_frame, labels == i + 1, scale)
        if hull is None:
            if fallback is None:
                name = f" ({names[i]!r})" if names else ""
                raise EmptyRegionError(f"line {i}{name} has no glyph foreground to refine")
            mask, fb_labels = fallback
            out |= ((fb_labels == i + 1) & (np.asarray(mask) > 0)).astype(np.uint8)
            continue
        out |= fill_convex_polygon(expand_polygon(hull, cfg.expansion), out.shape, half_open=True)
    return out


def refine_positions(glyph_frame, lines, cfg: RefinementConfig = RefinementConfig()) -> np.ndarray:
    """Refined 512x512 position mask for a glyph map whose lines sit in their own boxes."""
    glyph_frame = np.asarray(glyph_frame)
    lines = list(lines)
    labels = label_map(lines, glyph_frame.shape[0])
    return refine_mask(glyph_frame, labels, len(lines), cfg, names=[l.content for l in lines])
