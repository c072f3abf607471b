"""Pinhole cameras, rigid transforms, Plücker ray embeddings and trajectory resampling.

Extrinsics are world-to-camera: a world point X maps to camera coordinates
R @ X + t, and the camera centre in world coordinates is -R.T @ t.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import BoundsError, ConfigurationError, NumericError, ValidationError

ORTHO_TOL = 1e-6


def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("non-finite value")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    # values stored as fractions of image width (fx, cx) and height (fy, cy)
    is_normalized: bool = False

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError(f"intrinsics must be finite: {vals}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError(f"focal lengths must be positive: fx={self.fx}, fy={self.fy}")

    def denormalize(self, width: int | None = None, height: int | None = None) -> Intrinsics:
        """Pixel-unit intrinsics for a ``width`` x ``height`` raster.

        Pixel-unit intrinsics are returned unchanged.
        """
        if not self.is_normalized:
            return self
        if width is None or height is None:
            raise ConfigurationError("normalized intrinsics need image dimensions to denormalize")
        return Intrinsics(self.fx * width, self.fy * height, self.cx * width, self.cy * height)

    def scaled(self, factor: float) -> Intrinsics:
        if self.is_normalized:
            return self
        return Intrinsics(self.fx * factor, self.fy * factor, self.cx * factor, self.cy * factor)

    def for_raster(self, width: int, height: int, scale: float = 1.0) -> Intrinsics:
        """Normalized intrinsics are denormalized to the raster; pixel ones are scaled by ``scale``."""
        if self.is_normalized:
            return self.denormalize(width, height)
        return self.scaled(scale)

    @property
    def matrix(self) -> np.ndarray:
        if self.is_normalized:
            raise ConfigurationError("denormalize intrinsics before building the camera matrix")
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


def _check_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> None:
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > tol:
        raise ValidationError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3g})")
    if np.linalg.det(r) <= 0:
        raise ValidationError("rotation has non-positive determinant")


@dataclass(frozen=True, eq=False)
class Extrinsics:
    """World-to-camera pose."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _frozen(self.rotation, (3, 3))
        t = _frozen(self.translation, (3,))
        _check_rotation(r)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Extrinsics:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> Extrinsics:
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def lift(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def __eq__(self, other):
        if not isinstance(other, Extrinsics):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RigidTransform:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix, (4, 4))
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValidationError(f"bottom row must be (0, 0, 0, 1), got {m[3]}")
        _check_rotation(m[:3, :3])
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation, translation) -> RigidTransform:
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def is_identity(self) -> bool:
        return np.array_equal(self.matrix, np.eye(4))


@dataclass(frozen=True)
class CameraTrajectory:
    frames: tuple[tuple[Intrinsics, Extrinsics], ...]

    def __post_init__(self):
        frames = tuple((k, e) for k, e in self.frames)
        if not frames:
            raise ValidationError("camera trajectory must contain at least one frame")
        if len({k.is_normalized for k, _ in frames}) > 1:
            raise ValidationError("trajectory mixes normalized and pixel-unit intrinsics")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[tuple[Intrinsics, Extrinsics]]:
        return iter(self.frames)

    def __getitem__(self, i) -> tuple[Intrinsics, Extrinsics]:
        return self.frames[i]

    @property
    def intrinsics(self) -> list[Intrinsics]:
        return [k for k, _ in self.frames]

    @property
    def extrinsics(self) -> list[Extrinsics]:
        return [e for _, e in self.frames]


def relative_transform(a: Extrinsics, b: Extrinsics) -> RigidTransform:
    """``lift(a)^-1 @ lift(b)``, so that ``lift(a) @ result == lift(b)``."""
    ra, ta = a.rotation, a.translation
    # closed-form rigid inverse keeps a == b exact
    m = np.eye(4)
    m[:3, :3] = ra.T @ b.rotation
    m[:3, 3] = ra.T @ (b.translation - ta)
    return RigidTransform(m)


def projection_matrix(k: Intrinsics, t_rel: RigidTransform) -> np.ndarray:
    """3x4 matrix ``K @ [R | t]``."""
    return k.matrix @ t_rel.matrix[:3, :]


def pixel_center_grid(h: int, w: int) -> np.ndarray:
    """(h, w, 3) homogeneous image coordinates of pixel centres."""
    u = np.arange(w, dtype=np.float64) + 0.5
    v = np.arange(h, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv, np.ones_like(uu)], axis=-1)


def _raw_directions(k: Intrinsics, e: Extrinsics, uv1: np.ndarray) -> np.ndarray:
    k_inv = np.linalg.inv(k.matrix)
    return np.asarray(uv1, dtype=np.float64) @ (e.rotation @ k_inv).T + e.translation


def _moments_and_directions(d_raw: np.ndarray, e: Extrinsics) -> tuple[np.ndarray, np.ndarray]:
    d = d_raw / np.linalg.norm(d_raw, axis=-1, keepdims=True)
    return np.cross(e.center, d), d


def plucker_rays(k: Intrinsics, e: Extrinsics, uv1) -> tuple[np.ndarray, np.ndarray]:
    """Moments and unit directions for homogeneous image points ``uv1`` (..., 3).

    Directions follow ``d = R K^-1 [u, v, 1]^T + t`` and are then normalized.
    """
    d_raw = _raw_directions(k, e, uv1)
    bad = np.linalg.norm(d_raw, axis=-1) <= 1e-12
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NumericError(f"zero-length ray direction at point index {idx}")
    return _moments_and_directions(d_raw, e)


def plucker_embedding(traj: CameraTrajectory, h: int, w: int, dtype=np.float64) -> np.ndarray:
    """Per-pixel Plücker coordinates, shape (6, n, h, w), channels (m_x, m_y, m_z, d_x, d_y, d_z).

    Rays pass through pixel centres; normalized intrinsics are denormalized to (w, h).
    """
    if h < 1 or w < 1:
        raise ValidationError(f"raster dims must be positive, got {h}x{w}")
    grid = pixel_center_grid(h, w)
    out = np.empty((6, len(traj), h, w), dtype=dtype)
    for i, (k, e) in enumerate(traj):
        d_raw = _raw_directions(k.denormalize(w, h), e, grid)
        bad = np.linalg.norm(d_raw, axis=-1) <= 1e-12
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise NumericError(f"frame {i}: zero-length ray direction at pixel (u={col}, v={row})")
        m, d = _moments_and_directions(d_raw, e)
        out[:3, i] = np.moveaxis(m, -1, 0)
        out[3:, i] = np.moveaxis(d, -1, 0)
    return out


def resample_trajectory(traj: CameraTrajectory, stride: int, count: int) -> CameraTrajectory:
    """Every ``stride``-th frame starting at 0, ``count`` frames in total."""
    if stride < 1 or count < 1:
        raise ValidationError(f"stride and count must be positive (stride={stride}, count={count})")
    needed = (count - 1) * stride + 1
    if needed > len(traj):
        raise BoundsError(
            f"stride {stride} x {count} frames needs {needed} source frames "
            f"(last index {needed - 1}), trajectory has {len(traj)}"
        )
    return CameraTrajectory(tuple(traj.frames[i * stride] for i in range(count)))


def rotation_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    kx = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)
