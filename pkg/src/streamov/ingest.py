"""Session files: JSON Lines in, validated observation and query streams out."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

from .errors import EmptySession, ParseError, ValidationError

NORM_TOL = 1e-6
GOLD_LABELS = ("respond", "silence")
CATEGORIES = ("Real-Time", "Recall", "Proactive")


@dataclass(frozen=True, eq=False)
class ObservationRecord:
    id: int
    t: float
    dur: float
    visual_pixels: np.ndarray | None = None  # (h, w) uint8 luma
    audio_pcm: np.ndarray | None = None  # float64 in [-1, 1]
    sample_rate: int = 16000
    v_emb: np.ndarray | None = None
    a_emb: np.ndarray | None = None


@dataclass(frozen=True)
class QueryEvent:
    t: float
    text: str
    gold_label: str | None = None
    gold_answer: str | None = None
    category: str | None = None


@dataclass(frozen=True)
class SessionMeta:
    id: str
    emb_dim: int
    sample_rate: int


@dataclass(frozen=True, eq=False)
class SessionScript:
    meta: SessionMeta
    observations: tuple[ObservationRecord, ...]
    queries: tuple[QueryEvent, ...] = ()

    @property
    def span(self) -> tuple[float, float]:
        last = self.observations[-1]
        return self.observations[0].t, last.t + last.dur


@dataclass(frozen=True, eq=False)
class StreamWindow:
    """The most recent observations ending at step ``index``.

    ``prev`` is the observation just before the window, needed for the
    frame difference of the window's first element.
    """

    index: int
    observations: tuple[ObservationRecord, ...]
    prev: ObservationRecord | None = None

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def newest(self) -> ObservationRecord:
        return self.observations[-1]


def sliding_windows(script: SessionScript, w: int) -> Iterator[StreamWindow]:
    if w < 1:
        raise ValueError("window length must be >= 1")
    obs = script.observations
    for i in range(len(obs)):
        lo = max(0, i + 1 - w)
        yield StreamWindow(i, tuple(obs[lo : i + 1]), obs[lo - 1] if lo > 0 else None)


# -- validation ---------------------------------------------------------------


def _check_embedding(vec: np.ndarray | None, dim: int, what: str) -> None:
    if vec is None:
        return
    if vec.shape != (dim,):
        raise ValidationError(f"{what} has dimension {vec.shape[0]}, expected emb_dim={dim}")
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{what} must be finite")
    if abs(float(np.linalg.norm(vec)) - 1.0) > NORM_TOL:
        raise ValidationError(f"{what} must be unit-norm (within {NORM_TOL})")


def validate_session(script: SessionScript) -> SessionScript:
    if not script.observations:
        raise EmptySession(f"session {script.meta.id!r} has no observations")
    dim = script.meta.emb_dim
    prev_t = prev_id = None
    for ob in script.observations:
        where = f"obs {ob.id}"
        if prev_t is not None and not ob.t > prev_t:
            raise ValidationError(f"{where}: t strictly increasing violated ({ob.t} after {prev_t})")
        if prev_id is not None and not ob.id > prev_id:
            raise ValidationError(f"{where}: ids must be unique and monotone")
        if not ob.dur > 0:
            raise ValidationError(f"{where}: dur > 0 violated")
        if ob.visual_pixels is None and ob.v_emb is None:
            raise ValidationError(f"{where}: needs visual pixels or v_emb")
        if ob.audio_pcm is None and ob.a_emb is None:
            raise ValidationError(f"{where}: needs audio samples or a_emb")
        if ob.audio_pcm is not None and ob.audio_pcm.size and np.max(np.abs(ob.audio_pcm)) > 1.0:
            raise ValidationError(f"{where}: audio samples must lie in [-1, 1]")
        _check_embedding(ob.v_emb, dim, f"{where} v_emb")
        _check_embedding(ob.a_emb, dim, f"{where} a_emb")
        prev_t, prev_id = ob.t, ob.id
    lo, hi = script.span
    prev_q = None
    for j, q in enumerate(script.queries):
        if prev_q is not None and q.t < prev_q:
            raise ValidationError(f"query {j}: queries sorted by t violated")
        if not lo <= q.t <= hi:
            raise ValidationError(f"query {j}: t={q.t} outside session span [{lo}, {hi}]")
        if q.gold_label is not None and q.gold_label not in GOLD_LABELS:
            raise ValidationError(f"query {j}: gold_label must be one of {GOLD_LABELS}")
        prev_q = q.t
    return script


# -- decoding -----------------------------------------------------------------


def _opt_vec(raw: Any) -> np.ndarray | None:
    if raw is None:
        return None
    return np.asarray(raw, dtype=np.float64)


def decode_observation(rec: dict[str, Any], sample_rate: int) -> ObservationRecord:
    pixels = None
    vis = rec.get("visual")
    if vis is not None:
        w, h = int(vis["w"]), int(vis["h"])
        buf = base64.b64decode(vis["luma_b64"], validate=True)
        if len(buf) != w * h:
            raise ValueError(f"luma has {len(buf)} bytes, expected {w}x{h}")
        pixels = np.frombuffer(buf, dtype=np.uint8).reshape(h, w)
    pcm = None
    aud = rec.get("audio")
    if aud is not None:
        buf = base64.b64decode(aud["pcm16_b64"], validate=True)
        if len(buf) % 2:
            raise ValueError("pcm16 payload has odd byte length")
        pcm = np.frombuffer(buf, dtype="<i2").astype(np.float64) / 32768.0
    return ObservationRecord(
        id=int(rec["id"]),
        t=float(rec["t"]),
        dur=float(rec["dur"]),
        visual_pixels=pixels,
        audio_pcm=pcm,
        sample_rate=sample_rate,
        v_emb=_opt_vec(rec.get("v_emb")),
        a_emb=_opt_vec(rec.get("a_emb")),
    )


def _decode_query(rec: dict[str, Any]) -> QueryEvent:
    text = rec["text"]
    if not isinstance(text, str):
        raise ValueError("query text must be a string")
    return QueryEvent(
        t=float(rec["t"]),
        text=text,
        gold_label=rec.get("gold_label"),
        gold_answer=rec.get("gold_answer"),
        category=rec.get("category"),
    )


def parse_session(lines: Sequence[str], source: str = "<memory>") -> SessionScript:
    meta: SessionMeta | None = None
    observations: list[ObservationRecord] = []
    queries: list[QueryEvent] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(rec, dict):
            raise ParseError(lineno, "expected a JSON object")
        kind = rec.get("kind")
        try:
            if meta is None:
                if kind != "meta":
                    raise ValueError("first line must be the meta record")
                meta = SessionMeta(str(rec["id"]), int(rec["emb_dim"]), int(rec["sample_rate"]))
            elif kind == "obs":
                observations.append(decode_observation(rec, meta.sample_rate))
            elif kind == "query":
                queries.append(_decode_query(rec))
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(lineno, f"malformed {kind or 'record'}: {exc}") from None
    if meta is None:
        raise EmptySession(f"{source}: empty session file")
    return validate_session(SessionScript(meta, tuple(observations), tuple(queries)))


def read_session(path: str | Path) -> SessionScript:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_session(fh.read().splitlines(), source=str(path))


# -- encoding -----------------------------------------------------------------


def _f9(x: float) -> float:
    return float(f"{x:.9g}")


def _vec(v: np.ndarray | None) -> list[float] | None:
    return None if v is None else [_f9(x) for x in v.tolist()]


def encode_observation(ob: ObservationRecord) -> dict[str, Any]:
    visual = None
    if ob.visual_pixels is not None:
        h, w = ob.visual_pixels.shape
        raw = np.ascontiguousarray(ob.visual_pixels, dtype=np.uint8).tobytes()
        visual = {"w": w, "h": h, "luma_b64": base64.b64encode(raw).decode("ascii")}
    audio = None
    if ob.audio_pcm is not None:
        pcm = np.clip(np.round(ob.audio_pcm * 32768.0), -32768, 32767).astype("<i2")
        audio = {"pcm16_b64": base64.b64encode(pcm.tobytes()).decode("ascii")}
    return {
        "kind": "obs",
        "id": ob.id,
        "t": _f9(ob.t),
        "dur": _f9(ob.dur),
        "visual": visual,
        "audio": audio,
        "v_emb": _vec(ob.v_emb),
        "a_emb": _vec(ob.a_emb),
    }


def session_lines(script: SessionScript) -> list[str]:
    m = script.meta
    out = [json.dumps({"kind": "meta", "id": m.id, "emb_dim": m.emb_dim, "sample_rate": m.sample_rate})]
    out.extend(json.dumps(encode_observation(ob)) for ob in script.observations)
    for q in script.queries:
        out.append(
            json.dumps(
                {
                    "kind": "query",
                    "t": _f9(q.t),
                    "text": q.text,
                    "gold_label": q.gold_label,
                    "gold_answer": q.gold_answer,
                    "category": q.category,
                }
            )
        )
    return out


def write_session(script: SessionScript, path: str | Path) -> None:
    Path(path).write_text("\n".join(session_lines(script)) + "\n", encoding="utf-8")
