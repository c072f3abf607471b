"""Rasterization of text lines into the first-frame glyph map and position map."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .errors import UnsupportedCharacterError, ValidationError
from .polygon import convex_polygons_overlap, fill_convex_polygon, is_convex, signed_area

GLYPH_SIZE = 1024
POSITION_SIZE = 512
# fraction of the box kept free on each side when fitting text
MARGIN = 0.05
FONT_FILE = "DejaVuSans.ttf"


@dataclass(frozen=True, eq=False)
class TextLine:
    """One line of text placed in a quadrilateral of the 1024x1024 glyph canvas.

    ``box`` holds four (x, y) corners, clockwise on screen starting at the
    top-left of the text. ``depth`` is the scene-unit depth shared by the line.
    """

    content: str
    box: np.ndarray
    depth: float = 1.0

    def __post_init__(self):
        if not isinstance(self.content, str) or not self.content.strip():
            raise ValidationError("text line content must be a non-empty string")
        if "\n" in self.content or "\r" in self.content:
            raise ValidationError("text line content must be a single line")
        box = np.array(self.box, dtype=np.float64)
        if box.shape == (4,):
            x0, y0, x1, y1 = box
            box = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        if box.shape != (4, 2) or not np.all(np.isfinite(box)):
            raise ValidationError(f"box must be 4 (x, y) points, got shape {box.shape}")
        if box.min() < 0 or box.max() > GLYPH_SIZE:
            raise ValidationError(f"box {box.tolist()} lies outside the {GLYPH_SIZE}x{GLYPH_SIZE} canvas")
        area = signed_area(box)
        if area <= 0:
            raise ValidationError(f"box {box.tolist()} must be non-degenerate and clockwise on screen")
        if not is_convex(box):
            raise ValidationError(f"box {box.tolist()} must be a convex quadrilateral")
        if not (np.isfinite(self.depth) and self.depth > 0):
            raise ValidationError(f"depth must be positive, got {self.depth}")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "depth", float(self.depth))


def font_path() -> str:
    return str(resources.files("glyphcam") / "data" / FONT_FILE)


@lru_cache(maxsize=1)
def _supported_codepoints() -> frozenset:
    from fontTools.ttLib import TTFont

    with TTFont(font_path(), lazy=True) as tt:
        return frozenset(tt.getBestCmap())


@lru_cache(maxsize=256)
def _font(size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(font_path(), size, layout_engine=ImageFont.Layout.BASIC)


def check_supported(text: str) -> None:
    cmap = _supported_codepoints()
    for ch in text:
        if ord(ch) not in cmap:
            raise UnsupportedCharacterError(ch)


def validate_lines(lines) -> None:
    for i, a in enumerate(lines):
        for j in range(i + 1, len(lines)):
            if convex_polygons_overlap(a.box, lines[j].box):
                raise ValidationError(f"text boxes {i} and {j} overlap")


def _fit_font(text: str, width: float, height: float) -> ImageFont.FreeTypeFont:
    avail_w, avail_h = width * (1 - 2 * MARGIN), height * (1 - 2 * MARGIN)

    def fits(size):
        l, t, r, b = _font(size).getbbox(text)
        return r - l <= avail_w and b - t <= avail_h

    lo, hi = 1, max(2, int(np.ceil(height)) * 2)
    if not fits(lo):
        return _font(lo)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return _font(lo)


def _homography(src, dst) -> np.ndarray:
    """3x3 H with dst ~ H @ src for four point pairs."""
    rows, rhs = [], []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        rhs.extend([u, v])
    h = np.linalg.solve(np.array(rows, dtype=np.float64), np.array(rhs, dtype=np.float64))
    return np.append(h, 1.0).reshape(3, 3)


def _render_patch(text: str, width: float, height: float) -> np.ndarray:
    """Centered text on a ceil(width) x ceil(height) uint8 patch."""
    pw, ph = max(1, int(np.ceil(width))), max(1, int(np.ceil(height)))
    font = _fit_font(text, width, height)
    l, t, r, b = font.getbbox(text)
    x = int(round((width - (r - l)) / 2 - l))
    y = int(round((height - (b - t)) / 2 - t))
    img = Image.new("L", (pw, ph), 0)
    ImageDraw.Draw(img).text((x, y), text, fill=255, font=font)
    return np.asarray(img)


def _bilinear(patch: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample ``patch`` at continuous coordinates whose pixel centres sit at i + 0.5."""
    ph, pw = patch.shape
    padded = np.pad(patch.astype(np.float64), 1)
    fx, fy = x - 0.5 + 1, y - 0.5 + 1
    x0 = np.clip(np.floor(fx).astype(np.int64), 0, pw)
    y0 = np.clip(np.floor(fy).astype(np.int64), 0, ph)
    ax = np.clip(fx - x0, 0.0, 1.0)
    ay = np.clip(fy - y0, 0.0, 1.0)
    top = padded[y0, x0] * (1 - ax) + padded[y0, x0 + 1] * ax
    bot = padded[y0 + 1, x0] * (1 - ax) + padded[y0 + 1, x0 + 1] * ax
    return top * (1 - ay) + bot * ay


def _render_line(line: TextLine) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel indices (rows, cols) inside the box and their uint8 glyph coverage."""
    check_supported(line.content)
    q = line.box
    width = (np.linalg.norm(q[1] - q[0]) + np.linalg.norm(q[2] - q[3])) / 2
    height = (np.linalg.norm(q[3] - q[0]) + np.linalg.norm(q[2] - q[1])) / 2
    patch = _render_patch(line.content, width, height)

    rect = np.array([[0, 0], [width, 0], [width, height], [0, height]])
    canvas_to_patch = _homography(q, rect)
    inside = fill_convex_polygon(q, (GLYPH_SIZE, GLYPH_SIZE))
    rows, cols = np.nonzero(inside)
    pts = np.stack([cols + 0.5, rows + 0.5, np.ones(len(rows))])
    mapped = canvas_to_patch @ pts
    vals = _bilinear(patch, mapped[0] / mapped[2], mapped[1] / mapped[2])
    return rows, cols, np.clip(np.round(vals), 0, 255).astype(np.uint8)


def render_glyph_map(lines) -> np.ndarray:
    """1024x1024 float glyph map with coverage values k / 255 in [0, 1].

    Lines are drawn in the bundled font, fitted to their boxes with a fixed
    margin. Foreground never leaves a line's box.
    """
    lines = list(lines)
    validate_lines(lines)
    canvas = np.zeros((GLYPH_SIZE, GLYPH_SIZE), dtype=np.uint8)
    for line in lines:
        rows, cols, vals = _render_line(line)
        canvas[rows, cols] = np.maximum(canvas[rows, cols], vals)
    return canvas / 255.0


def render_position_map(lines) -> np.ndarray:
    """512x512 uint8 mask: each box scaled by 1/2 and filled with 1."""
    lines = list(lines)
    validate_lines(lines)
    mask = np.zeros((POSITION_SIZE, POSITION_SIZE), dtype=np.uint8)
    for line in lines:
        check_supported(line.content)
        mask |= fill_convex_polygon(line.box / 2.0, mask.shape)
    return mask


def label_map(lines, size: int = GLYPH_SIZE) -> np.ndarray:
    """int32 raster holding i + 1 inside line i's box (scaled to ``size``), 0 elsewhere."""
    labels = np.zeros((size, size), dtype=np.int32)
    scale = size / GLYPH_SIZE
    for i, line in enumerate(lines):
        labels[fill_convex_polygon(line.box * scale, labels.shape) > 0] = i + 1
    return labels
