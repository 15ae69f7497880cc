"""Seeded synthetic sessions with planted audio-visual events.

Observation 0 and every ``distractor_ratio + 1``-th observation from index
1 on are events: a hard scene cut in which every pixel moves by exactly 128 luma
levels, together with a full-scale audio burst. Distractors jitter the
current scene slightly over quiet noise. Each event carries the embedding
of a unique concept string; positive queries ask for one of those
concepts, negative queries ask for a concept that never occurs.

The first observation has no predecessor and so no measurable cut; the
event at index 1 keeps the warm-up windows anchored.

Queries arrive during event observations. When the evidence window is at
least ``distractor_ratio + 1`` long, every window holds an event, so events
strictly outscore all distractors and a long-term budget of at least the
event count keeps every event.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..backbone.stub import stub_embed
from ..errors import ConfigError
from ..ingest import ObservationRecord, QueryEvent, SessionMeta, SessionScript, validate_session


@dataclass(frozen=True)
class SynthConfig:
    n_obs: int = 200
    n_queries: int = 10
    pos_ratio: float = 0.5
    distractor_ratio: int = 7
    emb_dim: int = 64
    embed_seed: int = 0  # must match the stub backbone seed for queries to match events
    grid: tuple[int, int] = (16, 16)
    sample_rate: int = 1000
    dur: float = 1.0
    with_pixels: bool = True
    with_audio: bool = True

    @property
    def gap(self) -> int:
        return self.distractor_ratio + 1

    def is_event(self, i: int) -> bool:
        return i == 0 or (i - 1) % self.gap == 0

    @property
    def n_events(self) -> int:
        return 1 + -(-(self.n_obs - 1) // self.gap)

    def validate(self) -> None:
        if self.n_obs < 1:
            raise ConfigError("n_obs must be >= 1")
        if self.n_queries < 0 or self.n_obs < self.n_queries:
            raise ConfigError("need 0 <= n_queries <= n_obs")
        if not 0.0 <= self.pos_ratio <= 1.0:
            raise ConfigError("pos_ratio must lie in [0, 1]")
        if self.distractor_ratio < 0:
            raise ConfigError("distractor_ratio must be >= 0")
        if self.n_queries > self.n_events:
            raise ConfigError(
                f"{self.n_queries} queries need as many events; only {self.n_events} fit in {self.n_obs} observations"
            )
        if self.emb_dim < 2 or self.sample_rate < 1 or self.dur <= 0:
            raise ConfigError("emb_dim, sample_rate and dur must be positive")


@dataclass
class SyntheticSession:
    script: SessionScript
    event_ids: list[int]
    # query index -> observation id holding its evidence (None for negatives)
    evidence: dict[int, int | None] = field(default_factory=dict)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def concept_text(session_id: str, k: int) -> str:
    return f"{session_id}: planted event #{k}"


def absent_text(session_id: str, j: int) -> str:
    return f"{session_id}: absent event #{j}"


def gen_synthetic_session(seed: int, cfg: SynthConfig = SynthConfig()) -> SyntheticSession:
    cfg.validate()
    rng = np.random.default_rng(seed)
    sid = f"synth-{seed}"
    h, w = cfg.grid
    n_samples = int(round(cfg.sample_rate * cfg.dur))
    frame = rng.integers(0, 256, size=(h, w), dtype=np.int16)
    observations: list[ObservationRecord] = []
    event_ids: list[int] = []
    event_concepts: dict[int, str] = {}
    for i in range(cfg.n_obs):
        if cfg.is_event(i):
            frame = (frame + 128) % 256
            scene = frame
            pixels = frame.astype(np.uint8)
            text = concept_text(sid, len(event_ids))
            emb = stub_embed(text, cfg.emb_dim, cfg.embed_seed, "text")
            v_emb = a_emb = emb
            audio = rng.uniform(-0.3, 0.3, n_samples)
            audio[rng.integers(n_samples)] = 1.0
            event_ids.append(i)
            event_concepts[i] = text
        else:
            pixels = np.clip(scene + rng.integers(-2, 3, size=(h, w)), 0, 255).astype(np.uint8)
            frame = pixels.astype(np.int16)
            v_emb, a_emb = _unit(rng, cfg.emb_dim), _unit(rng, cfg.emb_dim)
            audio = rng.normal(0.0, rng.uniform(0.005, 0.03), n_samples).clip(-0.25, 0.25)
        # quantize to the on-disk pcm16 grid so files round-trip exactly
        audio = np.round(audio * 32768.0).clip(-32768, 32767) / 32768.0
        observations.append(
            ObservationRecord(
                id=i,
                t=i * cfg.dur,
                dur=cfg.dur,
                visual_pixels=pixels if cfg.with_pixels else None,
                audio_pcm=audio if cfg.with_audio else None,
                sample_rate=cfg.sample_rate,
                v_emb=v_emb,
                a_emb=a_emb,
            )
        )

    n_pos = int(round(cfg.n_queries * cfg.pos_ratio))
    arrivals = sorted(rng.choice(len(event_ids), size=cfg.n_queries, replace=False).tolist())
    positive = np.zeros(cfg.n_queries, dtype=bool)
    positive[rng.choice(cfg.n_queries, size=n_pos, replace=False)] = True
    used: set[int] = set()
    queries: list[QueryEvent] = []
    evidence: dict[int, int | None] = {}
    for j, a in enumerate(arrivals):
        arrival = event_ids[a]
        t = arrival * cfg.dur + 0.5 * cfg.dur
        if positive[j]:
            free = [e for e in event_ids[: a + 1] if e not in used]
            target = free[int(rng.integers(len(free)))]
            used.add(target)
            evidence[j] = target
            queries.append(
                QueryEvent(
                    t=t,
                    text=event_concepts[target],
                    gold_label="respond",
                    gold_answer=f"t={target * cfg.dur!r}",
                    category="Real-Time" if target == arrival else "Recall",
                )
            )
        else:
            evidence[j] = None
            queries.append(QueryEvent(t=t, text=absent_text(sid, j), gold_label="silence"))
    script = SessionScript(SessionMeta(sid, cfg.emb_dim, cfg.sample_rate), tuple(observations), tuple(queries))
    return SyntheticSession(validate_session(script), event_ids, evidence)
