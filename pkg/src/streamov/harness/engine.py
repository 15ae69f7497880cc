"""The per-session streaming fold: score, update memory, and answer queries."""

from __future__ import annotations

import bisect
import json
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from ..backbone.port import BackbonePort
from ..config import Config
from ..errors import StreamOVError
from ..evidence import EvidenceScorer
from ..ingest import ObservationRecord, QueryEvent, SessionScript, StreamWindow
from ..memory import (
    LongTermBuffer,
    MemoryEntry,
    MemorySnapshot,
    PayloadStore,
    ShortTermBuffer,
    serialize_interleaved,
    snapshot,
    update_long,
    update_short,
)
from ..trigger.model import Decision, TriggerParams, decide


@dataclass
class QueryDecision:
    query_index: int
    t: float
    text: str
    decision: str
    gold_label: str | None
    response: str | None
    memory_ids: list[int]
    h0: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        del out["h0"]
        return out


@dataclass
class StepRecord:
    step: int
    obs_id: int
    t: float
    n_short: int
    n_long: int
    n_snapshot: int
    query: int | None
    decisions: list[QueryDecision] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k != "decisions"}
        out["decisions"] = [d.to_json() for d in self.decisions]
        return out


@dataclass
class SessionTrace:
    session_id: str
    budget: int
    steps: list[StepRecord] = field(default_factory=list)
    # wall time per stage; kept apart from the replayable trace
    timings: list[dict[str, float]] = field(default_factory=list)

    @property
    def decisions(self) -> list[QueryDecision]:
        return [d for s in self.steps for d in s.decisions]

    def to_lines(self) -> list[str]:
        head = {"kind": "session", "id": self.session_id, "budget": self.budget}
        lines = [json.dumps(head, sort_keys=True)]
        for s in self.steps:
            lines.append(json.dumps({"kind": "step", **s.to_json()}, sort_keys=True))
        return lines

    def write(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "SessionTrace":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        head = json.loads(lines[0])
        trace = cls(head["id"], head["budget"])
        for line in lines[1:]:
            rec = json.loads(line)
            rec.pop("kind")
            decs = [QueryDecision(**d) for d in rec.pop("decisions")]
            trace.steps.append(StepRecord(**rec, decisions=decs))
        return trace


@dataclass
class StepState:
    """What the engine exposes after folding one observation."""

    index: int
    observation: ObservationRecord
    short: ShortTermBuffer
    long: LongTermBuffer
    snapshot: MemorySnapshot
    entry: MemoryEntry


class StreamingEngine:
    """Sequential memory fold over one observation stream."""

    def __init__(self, cfg: Config, backbone: BackbonePort):
        self.cfg = cfg
        self.backbone = backbone
        self.scorer = EvidenceScorer(backbone, cfg.audio_default)
        self.window: deque[ObservationRecord] = deque()
        self.prev: ObservationRecord | None = None  # observation just before the window
        self.frozen: dict[int, MemoryEntry] = {}
        self.long = LongTermBuffer(cfg.long_k)
        self.payloads = PayloadStore(self._resolve)
        self.short = ShortTermBuffer()
        self.snap = MemorySnapshot()
        self.index = -1

    def _resolve(self, ob: ObservationRecord) -> tuple[np.ndarray, np.ndarray]:
        return self.scorer.visual_embedding(ob), self.scorer.audio_embedding(ob)

    def _release(self, obs_id: int) -> None:
        self.payloads.drop(obs_id)
        self.frozen.pop(obs_id, None)

    def push(self, ob: ObservationRecord, query: QueryEvent | None = None) -> StepState:
        self.index += 1
        self.window.append(ob)
        outgoing: list[MemoryEntry] = []
        if len(self.window) > self.cfg.window_w:
            gone = self.window.popleft()
            self.prev = gone
            self.scorer.forget(gone.id)
            outgoing.append(self.frozen.pop(gone.id))
        view = StreamWindow(self.index, tuple(self.window), self.prev)
        newest = self.scorer.score(view, query)[-1]
        entry = MemoryEntry.from_evidence(newest)
        self.frozen[ob.id] = entry
        self.payloads.put(ob.id, ob.v_emb, ob.a_emb, source=ob)
        _, dropped = update_long(self.long, outgoing)
        for e in dropped:
            self._release(e.obs_id)
        self.short = update_short([self.frozen[o.id] for o in self.window], self.cfg.short_k)
        self.snap = snapshot(self.short, self.long)
        return StepState(self.index, ob, self.short, self.long, self.snap, entry)

    def context(self) -> dict[str, Any]:
        return serialize_interleaved(self.snap, self.payloads)


def queries_by_step(script: SessionScript) -> list[list[int]]:
    """Assign each query to the last observation that started at or before it."""
    starts = [o.t for o in script.observations]
    out: list[list[int]] = [[] for _ in starts]
    for j, q in enumerate(script.queries):
        i = max(0, bisect.bisect_right(starts, q.t) - 1)
        out[i].append(j)
    return out


def stream_session(
    script: SessionScript, cfg: Config, backbone: BackbonePort
) -> Iterator[tuple[StepState, list[int], StreamingEngine]]:
    """Fold the session, yielding each step's state and the queries arriving in it."""
    engine = StreamingEngine(cfg, backbone)
    by_step = queries_by_step(script)
    for i, ob in enumerate(script.observations):
        arriving = by_step[i]
        active = script.queries[arriving[-1]] if arriving else None
        try:
            state = engine.push(ob, active)
        except StreamOVError as exc:
            exc.step = i  # type: ignore[attr-defined]
            raise
        yield state, arriving, engine


def run_session(
    script: SessionScript,
    cfg: Config,
    backbone: BackbonePort,
    trigger_params: TriggerParams | None = None,
) -> SessionTrace:
    """Replay one session end to end.

    Without trigger parameters every query is answered (an always-respond
    baseline).
    """
    trace = SessionTrace(script.meta.id, cfg.short_k + cfg.long_k)
    threshold = cfg.trigger.threshold
    stream = stream_session(script, cfg, backbone)
    clock = time.perf_counter
    while True:
        t0 = clock()
        try:
            state, arriving, engine = next(stream)
        except StopIteration:
            break
        t1 = clock()
        decisions = []
        t_trigger = t_gen = 0.0
        for j in arriving:
            q = script.queries[j]
            try:
                a = clock()
                ctx = engine.context()
                h0 = backbone.prefill(ctx, q.text)
                verdict = decide(trigger_params, h0, threshold) if trigger_params is not None else Decision.RESPOND
                b = clock()
                t_trigger += b - a
                response = backbone.generate(ctx, q.text) if verdict is Decision.RESPOND else None
                t_gen += clock() - b
            except StreamOVError as exc:
                exc.step = state.index  # type: ignore[attr-defined]
                raise
            decisions.append(
                QueryDecision(j, q.t, q.text, verdict.value, q.gold_label, response, state.snapshot.ids(), h0)
            )
        trace.steps.append(
            StepRecord(
                state.index,
                state.observation.id,
                state.observation.t,
                len(state.short),
                len(state.long),
                len(state.snapshot),
                arriving[-1] if arriving else None,
                decisions,
            )
        )
        trace.timings.append({"memory": t1 - t0, "trigger": t_trigger, "generate": t_gen})
    return trace
