"""Budgeted long-short term memory over scored observations.

Short-term memory is the Top-K_S of the current window. Long-term memory is
a running Top-K_L over everything that has left the window. Because each
observation's base score is frozen when it is ingested, folding
``top_k(retained + outgoing)`` step by step yields exactly the offline
Top-K_L of the whole outgoing history.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import MissingPayload
from .evidence import Route, RoutedEvidence
from .ingest import ObservationRecord


@dataclass(frozen=True)
class MemoryEntry:
    obs_id: int
    t: float
    route: Route
    base: float

    @property
    def sort_key(self) -> tuple[float, float, int]:
        # best first: high score, then earlier time
        return (-self.base, self.t, self.obs_id)

    @classmethod
    def from_evidence(cls, ev: RoutedEvidence) -> "MemoryEntry":
        return cls(ev.obs_id, ev.t, ev.route, ev.base)


def top_k(entries: Iterable[MemoryEntry], k: int) -> list[MemoryEntry]:
    """Best k entries, ordered best first, duplicates by id removed."""
    seen: set[int] = set()
    out = []
    for e in sorted(entries, key=lambda e: e.sort_key):
        if e.obs_id in seen:
            continue
        seen.add(e.obs_id)
        out.append(e)
        if len(out) == k:
            break
    return out


@dataclass(frozen=True)
class ShortTermBuffer:
    entries: tuple[MemoryEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class LongTermBuffer:
    """Entries kept sorted best first; ``keys`` mirrors their sort keys."""

    k: int
    entries: list[MemoryEntry] = field(default_factory=list)
    keys: list[tuple[float, float, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> set[int]:
        return {e.obs_id for e in self.entries}

    def copy(self) -> "LongTermBuffer":
        return LongTermBuffer(self.k, list(self.entries), list(self.keys))


def update_short(window_scores: Sequence[RoutedEvidence | MemoryEntry], k_s: int) -> ShortTermBuffer:
    if k_s < 1:
        raise ValueError("k_s must be >= 1")
    entries = [e if isinstance(e, MemoryEntry) else MemoryEntry.from_evidence(e) for e in window_scores]
    return ShortTermBuffer(tuple(top_k(entries, k_s)))


def update_long(
    buf: LongTermBuffer, outgoing: Iterable[MemoryEntry], k_l: int | None = None
) -> tuple[LongTermBuffer, list[MemoryEntry]]:
    """Merge outgoing entries into the buffer in place.

    Returns the buffer and the entries that were evicted (or rejected) this
    step, so callers can release their payloads.
    """
    k = buf.k if k_l is None else k_l
    buf.k = k
    dropped: list[MemoryEntry] = []
    present = buf.ids()
    for e in outgoing:
        if e.obs_id in present:
            continue
        key = e.sort_key
        pos = bisect.bisect_left(buf.keys, key)
        if pos >= k:
            dropped.append(e)
            continue
        buf.keys.insert(pos, key)
        buf.entries.insert(pos, e)
        present.add(e.obs_id)
        while len(buf.entries) > k:
            buf.keys.pop()
            gone = buf.entries.pop()
            present.discard(gone.obs_id)
            dropped.append(gone)
    return buf, dropped


@dataclass(frozen=True)
class MemorySnapshot:
    entries: tuple[MemoryEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[int]:
        return [e.obs_id for e in self.entries]


def snapshot(short: ShortTermBuffer, long: LongTermBuffer | Sequence[MemoryEntry]) -> MemorySnapshot:
    long_entries = long.entries if isinstance(long, LongTermBuffer) else long
    merged: dict[int, MemoryEntry] = {}
    for e in (*short.entries, *long_entries):
        merged.setdefault(e.obs_id, e)
    return MemorySnapshot(tuple(sorted(merged.values(), key=lambda e: (e.t, e.obs_id))))


class PayloadStore:
    """Embedding payloads for observations that memory may still reference.

    A payload can be registered with only its source record; missing
    embeddings are then synthesized through ``resolve`` on first use.
    """

    def __init__(self, resolve: Callable[[ObservationRecord], tuple[np.ndarray, np.ndarray]] | None = None):
        self._data: dict[int, tuple[np.ndarray | None, np.ndarray | None, ObservationRecord | None]] = {}
        self._resolve = resolve

    def put(
        self,
        obs_id: int,
        v_emb: np.ndarray | None = None,
        a_emb: np.ndarray | None = None,
        source: ObservationRecord | None = None,
    ) -> None:
        self._data[obs_id] = (v_emb, a_emb, source)

    def drop(self, obs_id: int) -> None:
        self._data.pop(obs_id, None)

    def get(self, obs_id: int) -> tuple[np.ndarray | None, np.ndarray | None]:
        try:
            v, a, src = self._data[obs_id]
        except KeyError:
            raise MissingPayload(f"no payload stored for observation {obs_id}") from None
        if (v is None or a is None) and src is not None and self._resolve is not None:
            rv, ra = self._resolve(src)
            v = rv if v is None else v
            a = ra if a is None else a
            self._data[obs_id] = (v, a, None)
        return v, a

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, obs_id: int) -> bool:
        return obs_id in self._data


def _vec(v: np.ndarray) -> list[float]:
    return np.asarray(v, dtype=np.float64).tolist()


def serialize_interleaved(
    snap: MemorySnapshot, payloads: PayloadStore | Mapping[int, tuple[Any, Any]]
) -> dict[str, Any]:
    """One segment per entry, oldest first, carrying only its routed modalities."""
    segments = []
    for e in snap.entries:
        if isinstance(payloads, PayloadStore):
            v_emb, a_emb = payloads.get(e.obs_id)
        elif e.obs_id in payloads:
            v_emb, a_emb = payloads[e.obs_id]
        else:
            raise MissingPayload(f"no payload stored for observation {e.obs_id}")
        seg: dict[str, Any] = {"t": float(e.t), "modality": e.route.value, "v_emb": None, "a_emb": None}
        if e.route.has_visual:
            if v_emb is None:
                raise MissingPayload(f"observation {e.obs_id} lacks a visual payload")
            seg["v_emb"] = _vec(np.asarray(v_emb))
        if e.route.has_audio:
            if a_emb is None:
                raise MissingPayload(f"observation {e.obs_id} lacks an audio payload")
            seg["a_emb"] = _vec(np.asarray(a_emb))
        segments.append(seg)
    return {"segments": segments}


def save_context(context: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(context, sort_keys=True) + "\n", encoding="utf-8")


def load_context(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
