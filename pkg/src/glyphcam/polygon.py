"""Planar polygon helpers: convex hull, area centroid, scaling and scanline fill.

Points are (x, y) with x along raster columns and y along rows. "Counter-clockwise"
means positive shoelace area in those coordinates.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ValidationError

FILL_TOL = 1e-9


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, collinear boundary points dropped."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, dtype=np.float64).reshape(-1, 2)})
    if len(pts) < 3:
        raise DegenerateInputError(f"convex hull needs at least 3 distinct points, got {len(pts)}")

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)

    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateInputError("all points are collinear")
    return np.array(hull)


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def area_centroid(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-15:
        raise DegenerateInputError("polygon has zero area")
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def expand_polygon(poly, e: float) -> np.ndarray:
    """Scale every vertex about the area centroid by ``e``."""
    if not e > 0:
        raise ValidationError(f"expansion must be positive, got {e}")
    p = np.asarray(poly, dtype=np.float64)
    if e == 1.0:
        return p.copy()
    c = area_centroid(p)
    return c + e * (p - c)


def is_convex(poly) -> bool:
    p = np.asarray(poly, dtype=np.float64)
    n = len(p)
    signs = [_cross(p[i], p[(i + 1) % n], p[(i + 2) % n]) for i in range(n)]
    return all(s > 0 for s in signs) or all(s < 0 for s in signs)


def _last_index(hi: float, tol: float, half_open: bool) -> int:
    # last pixel whose centre (index + 0.5) is <= hi, or < hi when the far edge is open
    if half_open:
        return int(np.ceil(hi - 0.5 - tol)) - 1
    return int(np.floor(hi - 0.5 + tol))


def fill_convex_polygon(poly, shape: tuple[int, int], tol: float = FILL_TOL,
                        half_open: bool = False) -> np.ndarray:
    """uint8 mask of pixels whose centres lie in the closed convex polygon.

    With ``half_open`` a centre exactly on the right or bottom boundary is left
    out (top-left rule), so shapes tiling the plane never share a pixel and
    rasterized area does not grow with ties.
    """
    h, w = shape
    mask = np.zeros((h, w), dtype=np.uint8)
    p = np.asarray(poly, dtype=np.float64)
    row0 = max(int(np.ceil(p[:, 1].min() - 0.5 - tol)), 0)
    row1 = min(_last_index(p[:, 1].max(), tol, half_open), h - 1)
    if row1 < row0:
        return mask

    yc = np.arange(row0, row1 + 1) + 0.5
    left = np.full(yc.shape, np.inf)
    right = np.full(yc.shape, -np.inf)
    for (x0, y0), (x1, y1) in zip(p, np.roll(p, -1, axis=0)):
        span = (yc >= min(y0, y1) - tol) & (yc <= max(y0, y1) + tol)
        if not span.any():
            continue
        if abs(y1 - y0) <= tol:
            xs_lo = np.full(span.sum(), min(x0, x1))
            xs_hi = np.full(span.sum(), max(x0, x1))
        else:
            t = np.clip((yc[span] - y0) / (y1 - y0), 0.0, 1.0)
            xs_lo = xs_hi = x0 + t * (x1 - x0)
        left[span] = np.minimum(left[span], xs_lo)
        right[span] = np.maximum(right[span], xs_hi)

    for r, lo, hi in zip(range(row0, row1 + 1), left, right):
        if not np.isfinite(lo):
            continue
        c0 = max(int(np.ceil(lo - 0.5 - tol)), 0)
        c1 = min(_last_index(hi, tol, half_open), w - 1)
        if c1 >= c0:
            mask[r, c0:c1 + 1] = 1
    return mask


def convex_polygons_overlap(a, b) -> bool:
    """True when two convex polygons share interior area (touching edges do not count)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    for poly in (a, b):
        edges = np.roll(poly, -1, axis=0) - poly
        for ex, ey in edges:
            axis = np.array([-ey, ex])
            pa, pb = a @ axis, b @ axis
            if pa.max() <= pb.min() + 1e-12 or pb.max() <= pa.min() + 1e-12:
                return False
    return True
