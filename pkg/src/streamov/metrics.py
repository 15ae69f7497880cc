"""Raw per-observation evidence scores and within-window rank normalization.

All raw scores live in [0, 1]. Ranks turn them into a common relative
scale before they are combined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch

DEFAULT_EMBEDDING_AUDIO = 0.5


@dataclass(frozen=True)
class RawScores:
    sv_raw: float
    sa_raw: float
    scob_raw: float
    sqv_raw: float = 0.0
    sqa_raw: float = 0.0


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def visual_change(prev: np.ndarray | None, cur: np.ndarray) -> float:
    """Frame difference between consecutive observations.

    uint8 luma grids use the mean absolute difference over 255; float
    vectors (embeddings) use (1 - cosine) / 2. With no predecessor the
    change is 0.
    """
    if prev is None:
        return 0.0
    if prev.shape != cur.shape:
        raise ShapeMismatch(f"cannot diff {prev.shape} against {cur.shape}")
    if cur.dtype == np.uint8:
        if cur.size == 0:
            return 0.0
        diff = np.abs(cur.astype(np.int16) - prev.astype(np.int16))
        return float(diff.mean()) / 255.0
    cos = float(np.dot(prev, cur))
    return _clip01((1.0 - cos) / 2.0)


def audio_saliency(pcm: np.ndarray | None, default: float = DEFAULT_EMBEDDING_AUDIO) -> float:
    """Waveform peak: max |sample|. ``None`` marks an embedding-only record."""
    if pcm is None:
        return default
    if pcm.size == 0:
        return 0.0
    return _clip01(float(np.max(np.abs(pcm))))


def coburst_raw(sv_raw: float, sa_raw: float) -> float:
    return min(sv_raw, sa_raw)


def semantic_score(query_emb: np.ndarray, obs_emb: np.ndarray) -> float:
    if query_emb.shape != obs_emb.shape:
        raise DimensionMismatch(f"query dim {query_emb.shape} vs observation dim {obs_emb.shape}")
    return _clip01((1.0 + float(np.dot(query_emb, obs_emb))) / 2.0)


def rank_normalize(raws: Sequence[float], keys: Sequence[float] | None = None) -> list[float]:
    """Zero-indexed ascending rank divided by N - 1.

    Ties go to the element with the smaller key (timestamp), which by
    default is its position. A single element maps to 1.0.
    """
    n = len(raws)
    if n == 0:
        raise ValueError("rank_normalize needs at least one value")
    if n == 1:
        return [1.0]
    order = keys if keys is not None else range(n)
    ranked = sorted(range(n), key=lambda i: (raws[i], order[i]))
    out = [0.0] * n
    denom = n - 1
    for r, i in enumerate(ranked):
        out[i] = r / denom
    return out
