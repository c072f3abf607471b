"""File formats: camera trajectories, scene specs, raw tensors and conditioning bundles.

Trajectory files hold one camera per line with 19 whitespace-separated fields::

    frame_id fx fy cx cy 0 0 r11 r12 r13 t1 r21 r22 r23 t2 r31 r32 r33 t3

Intrinsics are fractions of image width (fx, cx) and height (fy, cy); the
3x4 matrix is world-to-camera, row-major. Blank lines and lines starting with
``#`` are ignored, as is a single-token first line holding a source URL.

A bundle directory contains ``glyph_####.png``, ``pos_####.png``,
``plucker.bin`` with its ``plucker.header``, ``prompt.txt`` and
``manifest.json`` (written last, with sha256 digests of every other file).
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from . import __version__
from .camera import CameraTrajectory, Extrinsics, Intrinsics
from .errors import BundleIOError, IntegrityError, ParseError, ValidationError
from .glyphs import GLYPH_SIZE, POSITION_SIZE, TextLine
from .propagation import DEFAULT_DEPTH, DepthAssignment
from .refinement import DEFAULT_EXPANSION, RefinementConfig

TRAJECTORY_FIELDS = 19
REORTHO_TOL = 1e-3
BUNDLE_FORMAT = "glyphcam-bundle"
BUNDLE_FORMAT_VERSION = 1
PLUCKER_ORDER = "channel,frame,row,col"

DEFAULT_FRAMES = 16
DEFAULT_PLUCKER_H = 256
DEFAULT_PLUCKER_W = 384


# -- trajectories ---------------------------------------------------------

def _orthonormalize(r: np.ndarray, lineno: int) -> np.ndarray:
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > REORTHO_TOL or np.linalg.det(r) <= 0:
        raise ParseError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3g})", line=lineno)
    if err == 0:
        return r
    u, _, vt = np.linalg.svd(r)
    return u @ vt


def parse_trajectory(text: str) -> CameraTrajectory:
    frames = []
    first = True
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if first and len(fields) == 1 and "://" in fields[0]:
            first = False
            continue
        first = False
        if len(fields) != TRAJECTORY_FIELDS:
            raise ParseError(f"expected {TRAJECTORY_FIELDS} fields, got {len(fields)}", line=lineno)
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", line=lineno) from None
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite field", line=lineno)
        w2c = np.array(vals[7:]).reshape(3, 4)
        try:
            k = Intrinsics(*vals[1:5], is_normalized=True)
            e = Extrinsics(_orthonormalize(w2c[:, :3], lineno), w2c[:, 3])
        except ValidationError as exc:
            raise ParseError(str(exc), line=lineno) from None
        frames.append((k, e))
    return CameraTrajectory(tuple(frames))


def format_trajectory(traj: CameraTrajectory) -> str:
    """Serialize a normalized-intrinsics trajectory; ``repr`` floats round-trip exactly."""
    out = []
    for i, (k, e) in enumerate(traj):
        if not k.is_normalized:
            raise ValidationError("only normalized intrinsics can be written to a trajectory file")
        w2c = np.hstack([e.rotation, e.translation[:, None]]).ravel()
        nums = [k.fx, k.fy, k.cx, k.cy, 0.0, 0.0, *w2c]
        out.append(" ".join([str(i)] + [repr(float(x)) for x in nums]))
    return "\n".join(out) + "\n"


def load_trajectory(path) -> CameraTrajectory:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleIOError(f"cannot read trajectory {path}: {exc.strerror or exc}") from exc
    return parse_trajectory(text)


# -- scene specs ----------------------------------------------------------

SCENE_KEYS = {"prompt", "lines", "trajectory", "frames", "plucker_h", "plucker_w",
              "expansion", "seed", "depth", "template"}
LINE_KEYS = {"text", "box", "depth"}


@dataclass(frozen=True)
class SceneSpec:
    prompt: str
    lines: tuple[TextLine, ...]
    trajectory_path: Path
    frames: int = DEFAULT_FRAMES
    plucker_h: int = DEFAULT_PLUCKER_H
    plucker_w: int = DEFAULT_PLUCKER_W
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    depth: DepthAssignment = field(default_factory=DepthAssignment)
    seed: int = 0
    template: int | str = "random"

    @property
    def texts(self) -> list[str]:
        return [line.content for line in self.lines]


def _number(doc, key, path, kind, default, positive=True):
    if key not in doc:
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float) if kind is float else int):
        raise ValidationError(f"{path}: expected {kind.__name__}, got {v!r}")
    if positive and not v > 0:
        raise ValidationError(f"{path}: must be positive, got {v!r}")
    return kind(v)


def load_scene_spec(document: str, base_dir=None) -> SceneSpec:
    """Parse a YAML (or JSON) scene document.

    Keys: ``prompt``, ``trajectory``, ``lines`` (each with ``text``, ``box``
    and optional ``depth``), and optional ``frames``, ``plucker_h``,
    ``plucker_w``, ``expansion``, ``depth``, ``seed``, ``template``.
    A relative ``trajectory`` path resolves against ``base_dir``.
    """
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise ParseError(f"scene spec is not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("scene spec must be a mapping")
    unknown = sorted(set(doc) - SCENE_KEYS)
    if unknown:
        raise ValidationError(f"unknown scene keys: {', '.join(map(str, unknown))}")
    for key in ("prompt", "trajectory"):
        if key not in doc:
            raise ValidationError(f"{key}: required field missing")
    if not isinstance(doc["prompt"], str):
        raise ValidationError("prompt: expected a string")
    if not isinstance(doc["trajectory"], str) or not doc["trajectory"]:
        raise ValidationError("trajectory: expected a file path")

    default_depth = _number(doc, "depth", "depth", float, DEFAULT_DEPTH)
    raw_lines = doc.get("lines", [])
    if not isinstance(raw_lines, list):
        raise ValidationError("lines: expected a list")
    lines = []
    for i, item in enumerate(raw_lines):
        path = f"lines[{i}]"
        if not isinstance(item, dict):
            raise ValidationError(f"{path}: expected a mapping")
        extra = sorted(set(item) - LINE_KEYS)
        if extra:
            raise ValidationError(f"{path}: unknown keys {', '.join(map(str, extra))}")
        if not isinstance(item.get("text"), str):
            raise ValidationError(f"{path}.text: expected a string")
        if "box" not in item:
            raise ValidationError(f"{path}.box: required field missing")
        depth = _number(item, "depth", f"{path}.depth", float, default_depth)
        try:
            lines.append(TextLine(item["text"], item["box"], depth))
        except (ValidationError, ValueError, TypeError) as exc:
            raise ValidationError(f"{path}: {exc}") from None

    template = doc.get("template", "random")
    if template != "random" and (isinstance(template, bool) or not isinstance(template, int) or template < 0):
        raise ValidationError(f"template: expected a non-negative index or 'random', got {template!r}")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError(f"seed: expected an integer, got {seed!r}")

    traj = Path(doc["trajectory"])
    if base_dir is not None and not traj.is_absolute():
        traj = Path(base_dir) / traj
    return SceneSpec(
        prompt=doc["prompt"],
        lines=tuple(lines),
        trajectory_path=traj,
        frames=_number(doc, "frames", "frames", int, DEFAULT_FRAMES),
        plucker_h=_number(doc, "plucker_h", "plucker_h", int, DEFAULT_PLUCKER_H),
        plucker_w=_number(doc, "plucker_w", "plucker_w", int, DEFAULT_PLUCKER_W),
        refinement=RefinementConfig(_number(doc, "expansion", "expansion", float, DEFAULT_EXPANSION)),
        depth=DepthAssignment.from_lines(lines, default_depth),
        seed=seed,
        template=template,
    )


def read_scene_spec(path) -> SceneSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleIOError(f"cannot read scene spec {path}: {exc.strerror or exc}") from exc
    return load_scene_spec(text, base_dir=path.parent)


# -- raw tensors ----------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write(path: Path, data: bytes) -> str:
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise BundleIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return _sha256(data)


def _read(path: Path, what: str) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise BundleIOError(f"missing {what}: {path}") from None
    except OSError as exc:
        raise BundleIOError(f"cannot read {what} {path}: {exc.strerror or exc}") from exc


def header_path(payload) -> Path:
    return Path(payload).with_suffix(".header")


def write_tensor(path, array, dtype: str = "<f4", order: str | None = None) -> dict:
    """Raw little-endian payload at ``path`` plus a JSON ``.header`` sidecar."""
    path = Path(path)
    payload = np.ascontiguousarray(array, dtype=np.dtype(dtype)).tobytes()
    header = {
        "shape": list(np.shape(array)),
        "dtype": np.dtype(dtype).str,
        "order": order or "C",
        "nbytes": len(payload),
        "sha256": _sha256(payload),
    }
    _write(path, payload)
    _write(header_path(path), (json.dumps(header, indent=2) + "\n").encode())
    return header


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    try:
        header = json.loads(_read(header_path(path), "tensor header"))
        shape = tuple(int(s) for s in header["shape"])
        dtype = np.dtype(header["dtype"])
    except (ValueError, KeyError, TypeError) as exc:
        raise IntegrityError(f"malformed tensor header {header_path(path)}: {exc}") from None
    if dtype.kind != "f" or dtype.byteorder == ">":
        raise IntegrityError(f"unsupported tensor dtype {header['dtype']!r}")
    payload = _read(path, "tensor payload")
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(payload) != expected:
        raise IntegrityError(f"{path}: payload is {len(payload)} bytes, header shape {shape} needs {expected}")
    if "sha256" in header and _sha256(payload) != header["sha256"]:
        raise IntegrityError(f"{path}: payload digest does not match header")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


# -- bundles --------------------------------------------------------------

@dataclass(eq=False)
class ConditioningBundle:
    """Per-frame glyph maps (n, 1024, 1024) with values k / 255, binary position maps
    (n, 512, 512), Plücker tensor (6, n, H, W) and the augmented prompt."""

    glyphs: np.ndarray
    positions: np.ndarray
    plucker: np.ndarray
    prompt: str
    parameters: dict = field(default_factory=dict)
    manifest: dict | None = None

    def __post_init__(self):
        self.glyphs = np.asarray(self.glyphs, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.uint8)
        self.plucker = np.asarray(self.plucker, dtype=np.float32)
        n = len(self.glyphs)
        if n < 1:
            raise ValidationError("bundle needs at least one frame")
        if self.glyphs.shape != (n, GLYPH_SIZE, GLYPH_SIZE):
            raise ValidationError(f"glyph maps must be (n, {GLYPH_SIZE}, {GLYPH_SIZE}), got {self.glyphs.shape}")
        if self.positions.shape != (n, POSITION_SIZE, POSITION_SIZE):
            raise ValidationError(f"position maps must be (n, {POSITION_SIZE}, {POSITION_SIZE}), "
                                  f"got {self.positions.shape}")
        if self.plucker.ndim != 4 or self.plucker.shape[:2] != (6, n):
            raise ValidationError(f"plucker tensor must be (6, {n}, H, W), got {self.plucker.shape}")
        if self.positions.max(initial=0) > 1:
            raise ValidationError("position maps must be binary")
        if not np.array_equal(np.round(self.glyphs * 255) / 255, self.glyphs):
            raise ValidationError("glyph values must be multiples of 1/255")

    @property
    def frames(self) -> int:
        return len(self.glyphs)


def _png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _decode_png(data: bytes, path: Path, size: int) -> np.ndarray:
    try:
        arr = np.asarray(Image.open(io.BytesIO(data)).convert("L"))
    except OSError as exc:
        raise IntegrityError(f"{path}: not a readable PNG ({exc})") from None
    if arr.shape != (size, size):
        raise IntegrityError(f"{path}: expected {size}x{size}, got {arr.shape[1]}x{arr.shape[0]}")
    return arr


def digest_file(path) -> str:
    return _sha256(_read(Path(path), "file"))


def write_bundle(bundle: ConditioningBundle, out_dir) -> dict:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise BundleIOError(f"cannot create bundle directory {out}: {exc.strerror or exc}") from exc

    files = {}
    for i, g in enumerate(bundle.glyphs):
        name = f"glyph_{i:04d}.png"
        files[name] = _write(out / name, _png_bytes(np.round(g * 255).astype(np.uint8)))
    for i, p in enumerate(bundle.positions):
        name = f"pos_{i:04d}.png"
        files[name] = _write(out / name, _png_bytes((p * 255).astype(np.uint8)))
    header = write_tensor(out / "plucker.bin", bundle.plucker, "<f4", PLUCKER_ORDER)
    files["plucker.bin"] = header["sha256"]
    files["plucker.header"] = digest_file(header_path(out / "plucker.bin"))
    files["prompt.txt"] = _write(out / "prompt.txt", bundle.prompt.encode("utf-8"))

    manifest = {
        "format": BUNDLE_FORMAT,
        "format_version": BUNDLE_FORMAT_VERSION,
        "generator": f"glyphcam {__version__}",
        "frames": bundle.frames,
        "glyph_size": GLYPH_SIZE,
        "position_size": POSITION_SIZE,
        "plucker_shape": list(bundle.plucker.shape),
        "parameters": bundle.parameters,
        "files": files,
    }
    _write(out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    bundle.manifest = manifest
    return manifest


def read_bundle(bundle_dir) -> ConditioningBundle:
    root = Path(bundle_dir)
    try:
        manifest = json.loads(_read(root / "manifest.json", "manifest"))
        n = int(manifest["frames"])
        files = dict(manifest["files"])
    except (ValueError, KeyError, TypeError) as exc:
        raise IntegrityError(f"malformed manifest in {root}: {exc}") from None
    if manifest.get("format") != BUNDLE_FORMAT:
        raise IntegrityError(f"{root}: not a {BUNDLE_FORMAT} directory")

    def checked(name, what):
        data = _read(root / name, what)
        if name not in files:
            raise IntegrityError(f"{name} is not listed in the manifest")
        if _sha256(data) != files[name]:
            raise IntegrityError(f"{root / name}: digest does not match manifest")
        return data

    glyphs, positions = [], []
    for i in range(n):
        name = f"glyph_{i:04d}.png"
        glyphs.append(_decode_png(checked(name, f"glyph frame {i}"), root / name, GLYPH_SIZE) / 255.0)
    for i in range(n):
        name = f"pos_{i:04d}.png"
        raw = _decode_png(checked(name, f"position frame {i}"), root / name, POSITION_SIZE)
        if not np.isin(raw, (0, 255)).all():
            raise IntegrityError(f"{root / name}: position map is not binary")
        positions.append((raw // 255).astype(np.uint8))

    checked("plucker.header", "plucker header")
    checked("plucker.bin", "plucker payload")
    plucker = read_tensor(root / "plucker.bin")
    if list(plucker.shape) != list(manifest.get("plucker_shape", plucker.shape)):
        raise IntegrityError(f"plucker shape {plucker.shape} disagrees with manifest")
    prompt = checked("prompt.txt", "prompt").decode("utf-8")

    return ConditioningBundle(np.stack(glyphs), np.stack(positions), plucker, prompt,
                              manifest.get("parameters", {}), manifest)
