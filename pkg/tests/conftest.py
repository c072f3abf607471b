"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's own code paths: hulls by
edge enumeration, warps by backward sampling through a homography, edit
distance by memoized recursion.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(str(resources.files("glyphcam") / "data"))


# -- geometry oracles -----------------------------------------------------

def brute_force_hull_vertices(points) -> set:
    """Hull vertices by checking every ordered pair as a candidate edge. O(n^3)."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    verts = set()
    n = len(pts)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a, b = pts[i], pts[j]
            ab = b - a
            rel = pts - a
            cross = ab[0] * rel[:, 1] - ab[1] * rel[:, 0]
            if np.any(cross < -1e-12):
                continue
            # collinear points must lie within the segment for a-b to be a maximal edge
            col = np.abs(cross) <= 1e-12
            proj = rel[col] @ ab / (ab @ ab)
            if np.all((proj >= -1e-12) & (proj <= 1 + 1e-12)):
                verts.add(tuple(a))
                verts.add(tuple(b))
    return verts


def dilate(mask: np.ndarray, r: int = 1) -> np.ndarray:
    m = mask.astype(bool)
    h, w = m.shape
    p = np.pad(m, r)
    out = np.zeros_like(m)
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out |= p[dy:dy + h, dx:dx + w]
    return out


def backward_sample(m: np.ndarray, homography: np.ndarray) -> np.ndarray:
    """Nearest-pixel backward warp: each target pixel centre pulls from H^-1 q."""
    h, w = m.shape
    u, v = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    q = np.stack([u, v, np.ones_like(u)], axis=-1) @ np.linalg.inv(homography).T
    with np.errstate(divide="ignore", invalid="ignore"):
        x = q[..., 0] / q[..., 2]
        y = q[..., 1] / q[..., 2]
    ok = (q[..., 2] > 0) & (x >= 0) & (x < w) & (y >= 0) & (y < h)
    out = np.zeros_like(m)
    out[ok] = m[np.floor(y[ok]).astype(int), np.floor(x[ok]).astype(int)]
    return out


def random_rotation(rng, max_deg: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(0.0, max_deg))
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def random_translation(rng, max_norm: float) -> np.ndarray:
    t = rng.normal(size=3)
    return t / np.linalg.norm(t) * rng.uniform(0.0, max_norm)


# -- string oracles -------------------------------------------------------

def recursive_levenshtein(a: str, b: str) -> int:
    """Edit distance by memoized recursion over prefixes (independent of the iterative DP)."""

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def edit_script_search(a: str, b: str, max_depth: int = 4) -> int:
    """Breadth-first search over single edits; exhaustive for short strings."""
    alphabet = sorted(set(a) | set(b))
    frontier = {a}
    seen = {a}
    for depth in range(max_depth + 1):
        if b in frontier:
            return depth
        nxt = set()
        for s in frontier:
            for i in range(len(s) + 1):
                for c in alphabet:
                    nxt.add(s[:i] + c + s[i:])
                if i < len(s):
                    nxt.add(s[:i] + s[i + 1:])
                    for c in alphabet:
                        nxt.add(s[:i] + c + s[i + 1:])
        frontier = nxt - seen
        seen |= nxt
    raise AssertionError("edit distance exceeds search depth")
