"""End-to-end construction of a conditioning bundle from a scene spec."""
from __future__ import annotations

import hashlib
import random
from dataclasses import replace

import numpy as np

from .camera import plucker_embedding, resample_trajectory
from .errors import BundleIOError, ValidationError
from .glyphs import render_glyph_map, render_position_map
from .propagation import propagate_sequence
from .refinement import RefinementConfig
from .scene_io import ConditioningBundle, SceneSpec, parse_trajectory

HINT_TEMPLATES = (
    "these texts are written on it: {T}",
    "with the words {T} on it",
    "the text {T} is clearly printed on it",
    "showing the words {T}",
)


def augment_prompt(prompt: str, texts, template_index: int | str = "random", seed: int = 0) -> str:
    """Append a hint sentence listing ``texts`` to ``prompt``.

    ``template_index="random"`` picks a template with a generator seeded by ``seed``.
    """
    texts = list(texts)
    if not texts:
        return prompt
    if template_index == "random":
        template_index = random.Random(seed).randrange(len(HINT_TEMPLATES))
    if not isinstance(template_index, int) or not 0 <= template_index < len(HINT_TEMPLATES):
        raise ValidationError(f"template index must be in [0, {len(HINT_TEMPLATES)}), got {template_index!r}")
    hint = HINT_TEMPLATES[template_index].format(T=", ".join(f"'{t}'" for t in texts))
    base = prompt.rstrip()
    return f"{base}, {hint}" if base else hint


def with_overrides(spec: SceneSpec, frames=None, expansion=None, seed=None, plucker_h=None,
                   plucker_w=None, template=None) -> SceneSpec:
    changes = {}
    if frames is not None:
        changes["frames"] = frames
    if expansion is not None:
        changes["refinement"] = RefinementConfig(expansion)
    if seed is not None:
        changes["seed"] = seed
    if plucker_h is not None:
        changes["plucker_h"] = plucker_h
    if plucker_w is not None:
        changes["plucker_w"] = plucker_w
    if template is not None:
        changes["template"] = template
    for key in ("frames", "plucker_h", "plucker_w"):
        if key in changes and changes[key] < 1:
            raise ValidationError(f"{key} must be positive, got {changes[key]}")
    return replace(spec, **changes)


def build_bundle(spec: SceneSpec, stride: int = 1, workers: int = 1) -> ConditioningBundle:
    try:
        traj_text = spec.trajectory_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleIOError(f"cannot read trajectory {spec.trajectory_path}: {exc.strerror or exc}") from exc
    traj = resample_trajectory(parse_trajectory(traj_text), stride, spec.frames)

    lines = list(spec.lines)
    g1 = render_glyph_map(lines)
    p1 = render_position_map(lines)
    glyphs, positions = propagate_sequence(g1, p1, traj, spec.depth, [l.box for l in lines],
                                           refinement=spec.refinement, workers=workers)
    plucker = plucker_embedding(traj, spec.plucker_h, spec.plucker_w).astype(np.float32)
    prompt = augment_prompt(spec.prompt, spec.texts, spec.template, spec.seed)

    parameters = {
        "frames": spec.frames,
        "stride": stride,
        "plucker_h": spec.plucker_h,
        "plucker_w": spec.plucker_w,
        "expansion": spec.refinement.expansion,
        "default_depth": spec.depth.default,
        "line_depths": list(spec.depth.per_line),
        "seed": spec.seed,
        "template": spec.template,
        "texts": spec.texts,
        "trajectory": spec.trajectory_path.name,
        "trajectory_sha256": hashlib.sha256(traj_text.encode("utf-8")).hexdigest(),
    }
    return ConditioningBundle(np.stack(glyphs), np.stack(positions), plucker, prompt, parameters)
