"""Propagation of first-frame maps through a camera trajectory.

Every line is treated as a fronto-parallel plane at its own depth. Foreground
pixels are back-projected, moved by the relative camera transform, projected
again and splatted to the nearest pixel; collisions keep the larger value and
pixels that leave the image or fall behind the camera are dropped.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraTrajectory, Extrinsics, Intrinsics, RigidTransform, relative_transform
from .errors import NumericError, ValidationError
from .polygon import fill_convex_polygon
from .refinement import RefinementConfig, refine_mask

DEFAULT_DEPTH = 1.0
W_EPS = 1e-6


@dataclass(frozen=True)
class DepthAssignment:
    default: float = DEFAULT_DEPTH
    per_line: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "per_line", tuple(float(d) for d in self.per_line))
        for d in (self.default, *self.per_line):
            if not (np.isfinite(d) and d > 0):
                raise ValidationError(f"depths must be positive, got {d}")

    @classmethod
    def from_lines(cls, lines, default: float = DEFAULT_DEPTH) -> DepthAssignment:
        return cls(default, tuple(line.depth for line in lines))

    def for_line(self, i: int) -> float:
        return self.per_line[i] if i < len(self.per_line) else self.default


def depth_map(shape, depth: DepthAssignment, line_regions) -> np.ndarray:
    z = np.full(shape, depth.default, dtype=np.float64)
    for i, quad in enumerate(line_regions):
        z[fill_convex_polygon(quad, shape) > 0] = depth.for_line(i)
    return z


def forward_map(shape, k: Intrinsics, t_rel: RigidTransform, z: np.ndarray, src_mask: np.ndarray):
    """Source and destination (rows, cols) for the masked pixels that land inside the image."""
    h, w = shape
    rows, cols = np.nonzero(src_mask)
    kk = k.matrix
    pts = np.stack([cols + 0.5, rows + 0.5, np.ones(rows.size)])
    cam = np.linalg.inv(kk) @ pts * z[rows, cols]
    proj = kk @ (t_rel.rotation @ cam + t_rel.translation[:, None])
    wz = proj[2]
    keep = wz > W_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(keep, proj[0] / np.where(keep, wz, 1.0), -1.0)
        v = np.where(keep, proj[1] / np.where(keep, wz, 1.0), -1.0)
    keep &= (u >= 0) & (u < w) & (v >= 0) & (v < h)
    return (rows[keep], cols[keep]), (np.floor(v[keep]).astype(np.int64), np.floor(u[keep]).astype(np.int64))


def _splat(values: np.ndarray, src, dst, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=values.dtype)
    np.maximum.at(out, dst, values[src])
    return out


def warp_map(m, k: Intrinsics, t1: Extrinsics, tn: Extrinsics, depth: DepthAssignment | float = DEFAULT_DEPTH,
             line_regions=()) -> np.ndarray:
    """Forward-warp raster ``m`` from the camera at ``t1`` to the camera at ``tn``.

    ``line_regions`` are convex quads in ``m``'s pixel coordinates; pixels
    inside region i sit at ``depth.for_line(i)``, all others at the default.
    Normalized intrinsics are denormalized to ``m``'s size.
    """
    m = np.asarray(m)
    if not isinstance(depth, DepthAssignment):
        depth = DepthAssignment(float(depth))
    h, w = m.shape
    k = k.denormalize(w, h)
    z = depth_map(m.shape, depth, line_regions)
    src, dst = forward_map(m.shape, k, relative_transform(t1, tn), z, m > 0)
    return _splat(m, src, dst, m.shape)


def plane_homography(k, t_rel: RigidTransform, depth: float, normal=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Homography ``K (R + t n^T / d) K^-1`` taking frame-1 pixels to frame-n pixels.

    Valid for points on the plane ``n . X = d`` in frame-1 camera coordinates,
    with frame-n coordinates given by ``R X + t``.
    """
    kk = k.matrix if isinstance(k, Intrinsics) else np.asarray(k, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    if not depth > 0:
        raise ValidationError(f"plane depth must be positive, got {depth}")
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValidationError("plane normal must be unit length")
    if abs(np.linalg.det(kk)) < 1e-12:
        raise NumericError("intrinsic matrix is singular")
    return kk @ (t_rel.rotation + np.outer(t_rel.translation, n) / depth) @ np.linalg.inv(kk)


def propagate_sequence(g1, p1, traj: CameraTrajectory, depth: DepthAssignment, line_regions,
                       refinement: RefinementConfig | None = None, workers: int = 1):
    """Glyph and position maps for every frame of ``traj``.

    ``line_regions`` are the text quads in glyph-canvas coordinates. Without
    ``refinement`` frame 1 is passed through and later frames are warped.
    With it, every frame's position map (frame 1 included) is rebuilt from the
    expanded hulls of that frame's glyphs; a line whose glyphs all left the
    frame keeps its warped position pixels instead.
    """
    g1 = np.asarray(g1)
    p1 = np.asarray(p1)
    regions = [np.asarray(q, dtype=np.float64) for q in line_regions]
    gshape, pshape = g1.shape, p1.shape
    pscale = pshape[0] / gshape[0]

    def labels_at(shape, scale):
        lab = np.zeros(shape, dtype=np.int32)
        for i, q in enumerate(regions):
            lab[fill_convex_polygon(q * scale, shape) > 0] = i + 1
        return lab

    g_labels = labels_at(gshape, 1.0)
    p_labels = labels_at(pshape, pscale)
    g_depth = depth_map(gshape, depth, regions)
    p_depth = depth_map(pshape, depth, [q * pscale for q in regions])
    _, e1 = traj[0]

    def frame(i):
        k, e = traj[i]
        if i == 0:
            g, gl, p, pl = g1, g_labels * (g1 > 0), p1, p_labels * (p1 > 0)
        else:
            t_rel = relative_transform(e1, e)
            kg = k.for_raster(gshape[1], gshape[0])
            kp = k.for_raster(pshape[1], pshape[0], scale=pscale)
            src, dst = forward_map(gshape, kg, t_rel, g_depth, g1 > 0)
            g, gl = _splat(g1, src, dst, gshape), _splat(g_labels, src, dst, gshape)
            src, dst = forward_map(pshape, kp, t_rel, p_depth, p1 > 0)
            p, pl = _splat(p1, src, dst, pshape), _splat(p_labels, src, dst, pshape)
        if refinement is not None:
            p = refine_mask(g, gl, len(regions), refinement, size=pshape[0], fallback=(p, pl))
        return g, p

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(frame, range(len(traj))))
    else:
        results = [frame(i) for i in range(len(traj))]
    return [g for g, _ in results], [p for _, p in results]
