"""Gating, fusion, decoupling and routing of normalized evidence."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import metrics
from .ingest import ObservationRecord, QueryEvent, StreamWindow
from .metrics import RawScores

if TYPE_CHECKING:
    from .backbone.port import BackbonePort


class Route(str, enum.Enum):
    VISUAL = "V"
    AUDIO = "A"
    ALIGNED = "AV"

    @property
    def has_visual(self) -> bool:
        return self is not Route.AUDIO

    @property
    def has_audio(self) -> bool:
        return self is not Route.VISUAL


@dataclass(frozen=True)
class RoutedEvidence:
    obs_id: int
    t: float
    s_v: float
    s_a: float
    s_cob: float
    s_qv: float
    s_qa: float
    s_qa_gated: float
    e_v: float
    e_a: float
    e_av: float
    e_v_hat: float
    e_a_hat: float
    base: float
    route: Route


def gate_audio(s_qa: float, s_a: float, s_cob: float) -> float:
    return s_qa * max(s_a, s_cob)


def fuse(
    s_qv: float, s_v: float, s_qa_gated: float, s_a: float, s_cob: float
) -> tuple[float, float, float, float, float]:
    """Return (E_v, E_a, E_av, decoupled E_v, decoupled E_a)."""
    e_v = max(s_qv, s_v)
    e_a = max(s_qa_gated, s_a)
    e_av = max(min(s_qv, s_qa_gated), min(e_v, e_a, s_cob))
    # e_av <= min(e_v, e_a) always, so the clamp never fires
    return e_v, e_a, e_av, max(e_v - e_av, 0.0), max(e_a - e_av, 0.0)


def route(e_v_hat: float, e_a_hat: float, e_av: float) -> tuple[Route, float]:
    """Dominant evidence type; ties resolve AV, then visual, then audio."""
    base = max(e_v_hat, e_a_hat, e_av)
    if e_av == base:
        return Route.ALIGNED, base
    if e_v_hat == base:
        return Route.VISUAL, base
    return Route.AUDIO, base


def evidence_from_normalized(
    obs_id: int, t: float, s_v: float, s_a: float, s_cob: float, s_qv: float, s_qa: float
) -> RoutedEvidence:
    s_qa_gated = gate_audio(s_qa, s_a, s_cob)
    e_v, e_a, e_av, e_v_hat, e_a_hat = fuse(s_qv, s_v, s_qa_gated, s_a, s_cob)
    label, base = route(e_v_hat, e_a_hat, e_av)
    return RoutedEvidence(
        obs_id, t, s_v, s_a, s_cob, s_qv, s_qa, s_qa_gated, e_v, e_a, e_av, e_v_hat, e_a_hat, base, label
    )


def evidence_from_raw(
    ids: Sequence[int], times: Sequence[float], raws: Sequence[RawScores], has_query: bool
) -> list[RoutedEvidence]:
    """Rank-normalize each raw channel across the window, then fuse and route."""
    rn = metrics.rank_normalize
    s_v = rn([r.sv_raw for r in raws], times)
    s_a = rn([r.sa_raw for r in raws], times)
    s_cob = rn([r.scob_raw for r in raws], times)
    if not has_query:
        # the query-aware channels carry no evidence
        s_qv = s_qa = [0.0] * len(raws)
    else:
        s_qv = rn([r.sqv_raw for r in raws], times)
        s_qa = rn([r.sqa_raw for r in raws], times)
    return [
        evidence_from_normalized(ids[i], times[i], s_v[i], s_a[i], s_cob[i], s_qv[i], s_qa[i])
        for i in range(len(raws))
    ]


class EvidenceScorer:
    """Computes raw scores for observations, caching the query-agnostic part.

    The visual change of an observation depends only on its predecessor and
    its audio peak only on itself, so both are computed once per id.
    """

    def __init__(self, backbone: "BackbonePort", audio_default: float = metrics.DEFAULT_EMBEDDING_AUDIO):
        self.backbone = backbone
        self.audio_default = audio_default
        self._agnostic: dict[int, tuple[float, float]] = {}
        self._synth: dict[tuple[int, str], np.ndarray] = {}

    def forget(self, obs_id: int) -> None:
        self._agnostic.pop(obs_id, None)
        self._synth.pop((obs_id, "v"), None)
        self._synth.pop((obs_id, "a"), None)

    def visual_embedding(self, ob: ObservationRecord) -> np.ndarray:
        if ob.v_emb is not None:
            return ob.v_emb
        key = (ob.id, "v")
        if key not in self._synth:
            self._synth[key] = self.backbone.embed_visual(ob)
        return self._synth[key]

    def audio_embedding(self, ob: ObservationRecord) -> np.ndarray:
        if ob.a_emb is not None:
            return ob.a_emb
        key = (ob.id, "a")
        if key not in self._synth:
            self._synth[key] = self.backbone.embed_audio(ob)
        return self._synth[key]

    def _visual_change(self, prev: ObservationRecord | None, ob: ObservationRecord) -> float:
        if prev is None:
            return 0.0
        if prev.visual_pixels is not None and ob.visual_pixels is not None:
            if prev.visual_pixels.shape == ob.visual_pixels.shape:
                return metrics.visual_change(prev.visual_pixels, ob.visual_pixels)
        return metrics.visual_change(self.visual_embedding(prev), self.visual_embedding(ob))

    def agnostic(self, prev: ObservationRecord | None, ob: ObservationRecord) -> tuple[float, float]:
        hit = self._agnostic.get(ob.id)
        if hit is None:
            hit = (self._visual_change(prev, ob), metrics.audio_saliency(ob.audio_pcm, self.audio_default))
            self._agnostic[ob.id] = hit
        return hit

    def raw_scores(self, window: StreamWindow, query_emb: np.ndarray | None) -> list[RawScores]:
        out = []
        prev = window.prev
        for ob in window.observations:
            sv, sa = self.agnostic(prev, ob)
            sqv = sqa = 0.0
            if query_emb is not None:
                sqv = metrics.semantic_score(query_emb, self.visual_embedding(ob))
                sqa = metrics.semantic_score(query_emb, self.audio_embedding(ob))
            out.append(RawScores(sv, sa, metrics.coburst_raw(sv, sa), sqv, sqa))
            prev = ob
        return out

    def score(self, window: StreamWindow, query: QueryEvent | None = None) -> list[RoutedEvidence]:
        if not window.observations:
            raise ValueError("cannot score an empty window")
        q_emb = self.backbone.embed_text(query.text) if query is not None else None
        raws = self.raw_scores(window, q_emb)
        obs = window.observations
        return evidence_from_raw([o.id for o in obs], [o.t for o in obs], raws, q_emb is not None)


def score_window(
    window: StreamWindow,
    query: QueryEvent | None,
    backbone: "BackbonePort",
    audio_default: float = metrics.DEFAULT_EMBEDDING_AUDIO,
) -> list[RoutedEvidence]:
    return EvidenceScorer(backbone, audio_default).score(window, query)
