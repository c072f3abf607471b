"""Command-line front end.

Exit codes: 0 success, 2 parse error (bad file contents or command line),
3 validation error, 4 numeric error, 5 I/O or bundle integrity error.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import BundleIOError, GlyphCamError, ValidationError
from .metrics import frame_similarity, mean_ned, parse_transcripts, prompt_similarity, sentence_accuracy
from .pipeline import build_bundle, with_overrides
from .scene_io import read_bundle, read_scene_spec, read_tensor, write_bundle


def _template(value: str):
    return value if value == "random" else int(value)


def _add_generate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", required=True, type=Path, help="scene spec (YAML)")
    p.add_argument("--out", required=True, type=Path, help="bundle output directory")
    p.add_argument("--frames", type=int, help="number of frames (default from spec, 16)")
    p.add_argument("--expansion", type=float, help="position refinement expansion (default 1.2)")
    p.add_argument("--seed", type=int, help="seed for the prompt hint template")
    p.add_argument("--template", type=_template, help="hint template index or 'random'")
    p.add_argument("--plucker-h", type=int, help="Plücker raster height (default 256)")
    p.add_argument("--plucker-w", type=int, help="Plücker raster width (default 384)")
    p.add_argument("--workers", type=int, default=1, help="threads used for per-frame warping")


def _generate(args, stride: int) -> int:
    spec = read_scene_spec(args.spec)
    spec = with_overrides(spec, frames=args.frames, expansion=args.expansion, seed=args.seed,
                          plucker_h=args.plucker_h, plucker_w=args.plucker_w, template=args.template)
    bundle = build_bundle(spec, stride=stride, workers=args.workers)
    write_bundle(bundle, args.out)
    digest = hashlib.sha256((args.out / "manifest.json").read_bytes()).hexdigest()
    print(f"frames={bundle.frames}")
    print(f"plucker_shape={'x'.join(map(str, bundle.plucker.shape))}")
    print(f"manifest_sha256={digest}")
    return 0


def cmd_generate(args) -> int:
    return _generate(args, stride=1)


def cmd_resample(args) -> int:
    if args.stride < 1:
        raise ValidationError(f"stride must be positive, got {args.stride}")
    return _generate(args, stride=args.stride)


def cmd_metrics(args) -> int:
    if not (args.transcripts or args.frame_embeddings):
        raise ValidationError("give --transcripts and/or --frame-embeddings")
    if args.prompt_embedding and not args.frame_embeddings:
        raise ValidationError("--prompt-embedding needs --frame-embeddings")

    report: dict[str, float | int] = {}
    if args.transcripts:
        try:
            text = Path(args.transcripts).read_text(encoding="utf-8")
        except OSError as exc:
            raise BundleIOError(f"cannot read {args.transcripts}: {exc.strerror or exc}") from exc
        pairs = parse_transcripts(text)
        report["pairs"] = len(pairs)
        report["senacc"] = sentence_accuracy(pairs, case_fold=args.case_fold)
        report["ned"] = mean_ned(pairs, case_fold=args.case_fold)
    if args.frame_embeddings:
        frames = read_tensor(args.frame_embeddings)
        report["frame_similarity"] = frame_similarity(frames)
        if args.prompt_embedding:
            report["prompt_similarity"] = prompt_similarity(read_tensor(args.prompt_embedding), frames)

    if args.format in ("table", "both"):
        width = max(len(k) for k in report)
        print(f"{'metric':<{width}}  value")
        for key, value in report.items():
            print(f"{key:<{width}}  {value:.4f}" if isinstance(value, float) else f"{key:<{width}}  {value}")
        if args.format == "both":
            print()
    if args.format in ("kv", "both"):
        for key, value in report.items():
            print(f"{key}={value!r}")
    return 0


def _outline(mask: np.ndarray) -> np.ndarray:
    m = mask.astype(bool)
    inner = m.copy()
    inner[1:] &= m[:-1]
    inner[:-1] &= m[1:]
    inner[:, 1:] &= m[:, :-1]
    inner[:, :-1] &= m[:, 1:]
    return m & ~inner


def cmd_preview(args) -> int:
    bundle = read_bundle(args.bundle)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i, (g, p) in enumerate(zip(bundle.glyphs, bundle.positions)):
            scale = g.shape[0] // p.shape[0]
            edge = _outline(np.kron(p, np.ones((scale, scale), dtype=np.uint8)))
            rgb = np.repeat(np.round(g * 255).astype(np.uint8)[..., None], 3, axis=2)
            rgb[edge] = (255, 48, 48)
            Image.fromarray(rgb, mode="RGB").save(out / f"preview_{i:04d}.png")
    except OSError as exc:
        raise BundleIOError(f"cannot write previews to {out}: {exc.strerror or exc}") from exc
    print(f"previews={bundle.frames}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glyphcam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a conditioning bundle from a scene spec")
    _add_generate_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("resample", help="generate from every STRIDE-th trajectory pose")
    _add_generate_flags(p)
    p.add_argument("--stride", type=int, required=True)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("metrics", help="Sen. ACC / NED and embedding similarities")
    p.add_argument("--transcripts", type=Path, help="UTF-8 file of 'reference<TAB>predicted' lines")
    p.add_argument("--frame-embeddings", type=Path, help="(frames, dim) tensor payload (.bin with .header)")
    p.add_argument("--prompt-embedding", type=Path, help="(dim,) tensor payload (.bin with .header)")
    p.add_argument("--case-fold", action="store_true", help="compare transcripts case-insensitively")
    p.add_argument("--format", choices=("both", "kv", "table"), default="both")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("preview", help="write glyph/position composites for a bundle")
    p.add_argument("--bundle", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_preview)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GlyphCamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BundleIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
