"""Text accuracy (Sen. ACC, NED) and cosine similarity scores."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UndefinedMetricError, ValidationError


@dataclass(frozen=True)
class TranscriptPair:
    reference: str
    predicted: str

    def __post_init__(self):
        if not self.reference.strip():
            raise ValidationError("reference transcript must be non-empty")


def levenshtein(a: str, b: str) -> int:
    """Unit-cost insert/delete/substitute distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _prep(s: str, case_fold: bool) -> str:
    s = s.strip()
    return s.casefold() if case_fold else s


def ned(a: str, b: str, case_fold: bool = False) -> float:
    """1 - levenshtein / max length, after trimming surrounding whitespace."""
    a, b = _prep(a, case_fold), _prep(b, case_fold)
    longest = max(len(a), len(b))
    if longest == 0:
        raise UndefinedMetricError("NED is undefined for two empty strings")
    return 1.0 - levenshtein(a, b) / longest


def sentence_accuracy(pairs, case_fold: bool = False) -> float:
    pairs = list(pairs)
    if not pairs:
        raise UndefinedMetricError("sentence accuracy needs at least one transcript pair")
    hits = sum(_prep(p.reference, case_fold) == _prep(p.predicted, case_fold) for p in pairs)
    return hits / len(pairs)


def mean_ned(pairs, case_fold: bool = False) -> float:
    pairs = list(pairs)
    if not pairs:
        raise UndefinedMetricError("NED needs at least one transcript pair")
    return float(np.mean([ned(p.reference, p.predicted, case_fold) for p in pairs]))


def _as_embeddings(frames) -> np.ndarray:
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValidationError(f"embedding sequence must be a (frames, dim) array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("embedding sequence contains non-finite values")
    if np.any(np.linalg.norm(x, axis=1) == 0):
        raise ValidationError("embedding sequence contains a zero vector")
    return x


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def frame_similarity(frames) -> float:
    """100 x mean cosine similarity of consecutive frame embeddings."""
    x = _as_embeddings(frames)
    if len(x) < 2:
        raise UndefinedMetricError("frame similarity needs at least two frames")
    u = _unit(x)
    cos = np.clip(np.sum(u[1:] * u[:-1], axis=1), -1.0, 1.0)
    return 100.0 * float(cos.mean())


def prompt_similarity(prompt_embedding, frames) -> float:
    """100 x mean cosine similarity between the prompt embedding and every frame."""
    x = _as_embeddings(frames)
    p = np.asarray(prompt_embedding, dtype=np.float64).reshape(-1)
    if p.shape[0] != x.shape[1]:
        raise ValidationError(f"prompt embedding has dim {p.shape[0]}, frames have dim {x.shape[1]}")
    if not np.linalg.norm(p) > 0:
        raise ValidationError("prompt embedding is a zero vector")
    cos = np.clip(_unit(x) @ _unit(p), -1.0, 1.0)
    return 100.0 * float(cos.mean())


def parse_transcripts(text: str) -> list[TranscriptPair]:
    """Tab-separated ``reference<TAB>predicted`` records, one per line; blank lines skipped."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        if "\t" not in raw:
            raise ParseError("expected 'reference<TAB>predicted'", line=lineno)
        ref, pred = raw.split("\t", 1)
        try:
            pairs.append(TranscriptPair(ref, pred))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return pairs
