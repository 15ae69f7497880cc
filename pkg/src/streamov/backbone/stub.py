"""Deterministic stand-in for the omni-model.

Embeddings are hash-seeded random directions. The prefill state is built
so that "the queried evidence is in memory" shows up as a fixed direction
of the hidden state, which makes the Respond/Wait task learnable.
"""

from __future__ import annotations

import hashlib
from typing import Any

import numpy as np

from ..errors import ConfigError, MalformedContext
from ..ingest import ObservationRecord

NO_EVIDENCE = "NO-EVIDENCE"


def _seed_from(kind: str, data: bytes, seed: int) -> int:
    h = hashlib.sha256()
    h.update(f"{seed}:{kind}:".encode())
    h.update(data)
    return int.from_bytes(h.digest()[:8], "little")


def stub_embed(data: str | bytes, dim: int, seed: int = 0, kind: str = "text") -> np.ndarray:
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if isinstance(data, str):
        data = data.encode("utf-8")
    rng = np.random.default_rng(_seed_from(kind, data, seed))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _segment_vectors(context: dict[str, Any], dim: int) -> list[tuple[float, np.ndarray]]:
    try:
        segments = context["segments"]
        out = []
        for seg in segments:
            t = float(seg["t"])
            for key in ("v_emb", "a_emb"):
                if seg.get(key) is not None:
                    vec = np.asarray(seg[key], dtype=np.float64)
                    if vec.shape != (dim,):
                        raise ValueError(f"{key} has shape {vec.shape}, expected ({dim},)")
                    out.append((t, vec))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedContext(f"bad serialized context: {exc}") from None
    return out


class StubBackbone:
    def __init__(self, emb_dim: int = 64, hidden_dim: int = 256, seed: int = 0, evidence_gain: float = 2.0):
        if hidden_dim <= emb_dim:
            raise ConfigError("stub backbone needs hidden_dim > emb_dim")
        self.emb_dim = emb_dim
        self.hidden_dim = hidden_dim
        self.seed = seed
        self.evidence_gain = evidence_gain
        rng = np.random.default_rng([seed, emb_dim, hidden_dim])
        q, _ = np.linalg.qr(rng.standard_normal((hidden_dim, emb_dim + 1)))
        # orthonormal columns: the first emb_dim embed content, the last is
        # the planted evidence direction, orthogonal to all content
        self.projection = q[:, :emb_dim]
        self.evidence_direction = q[:, emb_dim]

    def embed_text(self, text: str) -> np.ndarray:
        return stub_embed(text, self.emb_dim, self.seed, "text")

    def embed_visual(self, obs: ObservationRecord) -> np.ndarray:
        if obs.visual_pixels is None:
            if obs.v_emb is None:
                raise MalformedContext(f"observation {obs.id} has no visual signal")
            return obs.v_emb
        px = obs.visual_pixels
        return stub_embed(f"{px.shape}".encode() + px.tobytes(), self.emb_dim, self.seed, "visual")

    def embed_audio(self, obs: ObservationRecord) -> np.ndarray:
        if obs.audio_pcm is None:
            if obs.a_emb is None:
                raise MalformedContext(f"observation {obs.id} has no audio signal")
            return obs.a_emb
        pcm16 = np.round(obs.audio_pcm * 32767).astype("<i2")
        return stub_embed(pcm16.tobytes(), self.emb_dim, self.seed, "audio")

    def best_match(self, context: dict[str, Any], query: str) -> tuple[float, float] | None:
        """(cosine, timestamp) of the segment embedding closest to the query."""
        q = self.embed_text(query)
        best = None
        for t, vec in _segment_vectors(context, self.emb_dim):
            cos = float(np.dot(q, vec))
            if best is None or cos > best[0]:
                best = (cos, t)
        return best

    def prefill(self, context: dict[str, Any], query: str) -> np.ndarray:
        q = self.embed_text(query)
        vecs = [v for _, v in _segment_vectors(context, self.emb_dim)]
        content = q if not vecs else q + np.mean(vecs, axis=0)
        h = self.projection @ content
        if vecs:
            match = max(0.0, max(float(np.dot(q, v)) for v in vecs))
            h = h + self.evidence_gain * match * self.evidence_direction
        norm = np.linalg.norm(h)
        if norm == 0.0:
            return self.evidence_direction.copy()
        return h / norm

    def generate(self, context: dict[str, Any], query: str) -> str:
        best = self.best_match(context, query)
        if best is None:
            return NO_EVIDENCE
        return f"Evidence for {query!r} at t={best[1]!r}"
