"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line for the summary."""
import json
import time

import numpy as np

from glyphcam.camera import CameraTrajectory, Extrinsics, Intrinsics, RigidTransform, plucker_embedding
from glyphcam.cli import main
from glyphcam.glyphs import TextLine, render_glyph_map, render_position_map
from glyphcam.metrics import TranscriptPair, frame_similarity, mean_ned, ned, prompt_similarity, sentence_accuracy
from glyphcam.pipeline import build_bundle
from glyphcam.polygon import convex_polygons_overlap, expand_polygon, fill_convex_polygon
from glyphcam.propagation import DepthAssignment, plane_homography, propagate_sequence, warp_map
from glyphcam.refinement import DEFAULT_EXPANSION, RefinementConfig, refine_positions
from glyphcam.scene_io import ConditioningBundle, read_bundle, read_scene_spec, write_bundle

from conftest import backward_sample, dilate, random_rotation, random_translation, record, recursive_levenshtein

WORDS = ["CAFE", "OPEN", "Hello", "STOP", "Milk 2%", "Bäckerei", "SALE", "No. 42", "exit", "Ωmega"]


def _random_lines(rng, max_lines=3):
    """Non-overlapping random boxes, each at least 160 x 60 px."""
    lines = []
    while len(lines) < rng.integers(1, max_lines + 1):
        w, h = rng.uniform(160, 500), rng.uniform(60, 180)
        x0, y0 = rng.uniform(0, 1024 - w), rng.uniform(0, 1024 - h)
        jitter = rng.uniform(-0.08, 0.08, size=(4, 2)) * [w, h]
        quad = np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]) + jitter
        quad = np.clip(quad, 0, 1024)
        try:
            line = TextLine(WORDS[rng.integers(len(WORDS))], quad)
        except ValueError:
            continue
        if any(convex_polygons_overlap(line.box, other.box) for other in lines):
            continue
        lines.append(line)
    return lines


def test_criterion_1_constants(data_dir):
    spec = read_scene_spec(data_dir / "scenes" / "mug.yaml")
    start = time.perf_counter()
    bundle = build_bundle(spec)
    elapsed = time.perf_counter() - start
    ok = (
        bundle.glyphs.shape[1:] == (1024, 1024)
        and bundle.positions.shape[1:] == (512, 512)
        and bundle.plucker.shape == (6, 16, 256, 384)
        and DEFAULT_EXPANSION == 1.2 == spec.refinement.expansion
        and elapsed < 10.0
    )
    record("1 constants", ok, f"G {bundle.glyphs.shape[1:]}, P {bundle.positions.shape[1:]}, "
                              f"plucker {bundle.plucker.shape}, e={spec.refinement.expansion}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_static_identity():
    rng = np.random.default_rng(2)
    lines = _random_lines(rng)
    g1, p1 = render_glyph_map(lines), render_position_map(lines)
    k = Intrinsics(0.5, 0.75, 0.5, 0.5, is_normalized=True)
    pose = Extrinsics(random_rotation(rng, 30), random_translation(rng, 1))
    traj = CameraTrajectory(((k, pose),) * 16)
    ok = True
    for cfg in (None, RefinementConfig()):
        gs, ps = propagate_sequence(g1, p1, traj, DepthAssignment.from_lines(lines), [l.box for l in lines], cfg)
        ok &= len(gs) == 16 and all(np.array_equal(g, gs[0]) for g in gs) and np.array_equal(gs[0], g1)
        ok &= all(np.array_equal(p, ps[0]) for p in ps)
    record("2 static identity", ok, "16 frames, with and without refinement")
    assert ok


def test_criterion_3_warp_oracle():
    rng = np.random.default_rng(3)
    k = Intrinsics(512, 512, 512, 512)
    start = time.perf_counter()
    worst = 1.0
    for _ in range(100):
        g = render_glyph_map(_random_lines(rng))
        tn = Extrinsics(random_rotation(rng, 15), random_translation(rng, 0.2))
        fwd = warp_map(g, k, Extrinsics.identity(), tn, 1.0) > 0
        h = plane_homography(k, RigidTransform.from_rt(tn.rotation, tn.translation), 1.0)
        bwd = backward_sample(g, h) > 0
        if fwd.sum() == 0 and bwd.sum() == 0:
            continue
        agree = min((fwd & dilate(bwd)).sum() / max(fwd.sum(), 1), (bwd & dilate(fwd)).sum() / max(bwd.sum(), 1))
        worst = min(worst, agree)
    elapsed = time.perf_counter() - start
    ok = worst >= 0.99 and elapsed < 60
    record("3 warp oracle", ok, f"worst agreement {worst:.4f} over 100 cases, {elapsed:.1f}s")
    assert ok


def test_criterion_4_dolly():
    rng = np.random.default_rng(4)
    m = np.zeros((256, 384))
    m[40:220, 30:340] = rng.integers(1, 256, size=(180, 310)) / 255.0
    k = Intrinsics(100, 100, 192, 128)
    out = warp_map(m, k, Extrinsics.identity(), Extrinsics(np.eye(3), [0.1, 0, 0]), 1.0)
    rows, cols = np.nonzero(m)
    target = cols + 10
    inside = target < 384
    exact = out[rows[inside], target[inside]] == m[rows[inside], cols[inside]]
    frac = exact.mean()
    ok = frac >= 0.99 and (out > 0).sum() == inside.sum()
    record("4 dolly", ok, f"{frac:.4f} of pixels shifted exactly +10 px")
    assert ok


def test_criterion_5_plucker():
    rng = np.random.default_rng(5)
    worst_norm = worst_dot = 0.0
    for _ in range(10):
        frames = tuple(
            (Intrinsics(*rng.uniform(0.3, 1.2, 2), *rng.uniform(0.3, 0.7, 2), is_normalized=True),
             Extrinsics(random_rotation(rng, 180), random_translation(rng, 3)))
            for _ in range(16)
        )
        p = plucker_embedding(CameraTrajectory(frames), 256, 384)
        m, d = p[:3], p[3:]
        worst_norm = max(worst_norm, np.abs(np.linalg.norm(d, axis=0) - 1).max())
        worst_dot = max(worst_dot, np.abs((m * d).sum(axis=0)).max())
    k = Intrinsics(0.5, 0.75, 0.5, 0.5, is_normalized=True)
    ident = plucker_embedding(CameraTrajectory(((k, Extrinsics.identity()),) * 3), 256, 384)
    zero_moment = not ident[:3].any()
    ok = worst_norm <= 1e-6 and worst_dot <= 1e-6 and zero_moment
    record("5 plucker invariants", ok, f"max |‖d‖-1| {worst_norm:.2e}, max |m·d| {worst_dot:.2e}, "
                                       f"identity moments zero: {zero_moment}")
    assert ok


def _convex_region(rng):
    """A filled convex quad as glyph foreground, placed so its expansions stay on the canvas."""
    while True:
        line = _random_lines(rng, 1)[0]
        grown = expand_polygon(line.box, 1.4)
        if grown.min() >= 0 and grown.max() <= 1024:
            return line, fill_convex_polygon(line.box, (1024, 1024)).astype(np.float64)


def test_criterion_6_refinement():
    rng = np.random.default_rng(6)
    contained = monotone = True
    for _ in range(50):
        lines = _random_lines(rng)
        g = render_glyph_map(lines)
        masks = {e: refine_positions(g, lines, RefinementConfig(e)) for e in (0.9, 1.0, 1.2, 1.4)}
        rows, cols = np.nonzero(g > 0.5)
        for e in (1.0, 1.2, 1.4):
            contained &= bool(masks[e][rows // 2, cols // 2].all())
        for lo, hi in ((0.9, 1.0), (1.0, 1.2), (1.2, 1.4)):
            monotone &= bool(np.all(masks[hi] >= masks[lo])) and masks[hi].sum() > masks[lo].sum()

    worst_ratio = 0.0
    for _ in range(50):
        line, g = _convex_region(rng)
        base = refine_positions(g, [line], RefinementConfig(1.0)).sum()
        grown = refine_positions(g, [line], RefinementConfig(1.2)).sum()
        worst_ratio = max(worst_ratio, abs(grown / base / 1.44 - 1))

    ok = contained and worst_ratio <= 0.02 and monotone
    record("6 refinement", ok, f"containment {contained}, monotone {monotone}, "
                               f"worst |ratio/1.44-1| {worst_ratio:.4f} on 50 convex regions")
    assert ok


def test_criterion_7_metrics():
    rng = np.random.default_rng(7)
    alphabet = list("abcAB 1é")
    pairs = []
    for _ in range(1000):
        a = "".join(rng.choice(alphabet, rng.integers(0, 9)))
        b = "".join(rng.choice(alphabet, rng.integers(0, 9)))
        if not a.strip():
            a += "x"  # references are never blank
        pairs.append(TranscriptPair(a, b))
    ned_ok = all(
        ned(p.reference, p.predicted)
        == 1 - recursive_levenshtein(p.reference.strip(), p.predicted.strip())
        / max(len(p.reference.strip()), len(p.predicted.strip()))
        for p in pairs
    )
    hits = 0
    for p in pairs:
        hits += recursive_levenshtein(p.reference.strip(), p.predicted.strip()) == 0
    acc_ok = sentence_accuracy(pairs) == hits / 1000
    mean_ok = mean_ned(pairs) == float(np.mean([ned(p.reference, p.predicted) for p in pairs]))
    hello = ned("HELLO", "HELO")
    hello_ok = abs(hello - 0.8) <= 1e-15
    s60 = [np.cos(np.pi / 3), np.sin(np.pi / 3)]
    cos_cases = [
        (frame_similarity([[2, 1, 0], [2, 1, 0], [2, 1, 0]]), 100.0),
        (frame_similarity([[1, 0], [0, 1]]), 0.0),
        (frame_similarity([[1, 0], s60]), 50.0),
        (frame_similarity([[1, 0], [-3, 0]]), -100.0),
        (prompt_similarity([0, 1], [[0, 5], [1, 0]]), 50.0),
    ]
    cos_err = max(abs(got - want) for got, want in cos_cases)
    ok = ned_ok and acc_ok and mean_ok and hello_ok and cos_err <= 1e-9
    record("7 metrics", ok, f"NED exact {ned_ok}, Sen.ACC exact {acc_ok}, ned(HELLO,HELO)={hello!r}, "
                            f"cosine err {cos_err:.1e}")
    assert ok


def test_criterion_8_serialization(tmp_path):
    rng = np.random.default_rng(8)
    lines = _random_lines(rng)
    n, h, w = 3, 32, 48
    g, p = render_glyph_map(lines), render_position_map(lines)
    bundle = ConditioningBundle(np.stack([g] * n), np.stack([p] * n),
                                rng.normal(size=(6, n, h, w)).astype(np.float32), "prompt")
    write_bundle(bundle, tmp_path / "b")
    back = read_bundle(tmp_path / "b")
    identical = (np.array_equal(back.glyphs, bundle.glyphs) and np.array_equal(back.positions, bundle.positions)
                 and back.plucker.tobytes() == bundle.plucker.tobytes() and back.prompt == bundle.prompt)
    size_ok = (tmp_path / "b" / "plucker.bin").stat().st_size == 6 * n * h * w * 4

    detected = 0
    files = sorted(f for f in (tmp_path / "b").iterdir() if f.name != "manifest.json")
    for f in files:
        data = f.read_bytes()
        pos = int(rng.integers(len(data)))
        f.write_bytes(data[:pos] + bytes([data[pos] ^ 0x40]) + data[pos + 1:])
        try:
            read_bundle(tmp_path / "b")
        except Exception as exc:  # noqa: BLE001  any error counts, exit code checked below
            detected += getattr(exc, "exit_code", None) == 5
        f.write_bytes(data)
    ok = identical and size_ok and detected == len(files)
    record("8 serialization", ok, f"round trip {identical}, size {size_ok}, corruption detected {detected}/{len(files)}")
    assert ok


def test_criterion_9_determinism(tmp_path, data_dir, capsys):
    spec = str(data_dir / "scenes" / "mug.yaml")
    assert main(["generate", "--spec", spec, "--out", str(tmp_path / "a")]) == 0
    assert main(["generate", "--spec", spec, "--out", str(tmp_path / "b"), "--workers", "4"]) == 0
    out = capsys.readouterr().out
    digests = [line.split("=")[1] for line in out.splitlines() if line.startswith("manifest_sha256=")]
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    ok = len(digests) == 2 and digests[0] == digests[1] and a["parameters"]["seed"] == 7
    record("9 determinism", ok, f"manifest sha256 {digests[0][:16]}... twice" if ok else f"digests {digests}")
    assert ok
