"""Labeled post-prefill hidden states harvested from replayed sessions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..backbone.port import BackbonePort
from ..config import Config
from ..ingest import SessionScript
from .model import RESPOND, WAIT
from .train import HiddenStateBatch

# default class counts for a trigger training set
DEFAULT_POSITIVES = 2500
DEFAULT_NEGATIVES = 2500


@dataclass(frozen=True)
class DatasetConfig:
    n_pos: int | None = DEFAULT_POSITIVES
    n_neg: int | None = DEFAULT_NEGATIVES
    balance: bool = True


def build_trigger_dataset(
    sessions: Iterable[SessionScript],
    backbone: BackbonePort,
    cfg: Config,
    ds: DatasetConfig = DatasetConfig(),
) -> HiddenStateBatch:
    """Replay each session and pair the prefill state at every query with its gold label.

    Collection stops once both class targets are met (``None`` means no cap).
    With ``balance`` the larger class is truncated to the size of the smaller.
    """
    from ..harness.engine import stream_session

    pos: list[np.ndarray] = []
    neg: list[np.ndarray] = []

    def full() -> bool:
        return (ds.n_pos is not None and len(pos) >= ds.n_pos) and (ds.n_neg is not None and len(neg) >= ds.n_neg)

    for script in sessions:
        if full():
            break
        for _, arriving, engine in stream_session(script, cfg, backbone):
            for j in arriving:
                q = script.queries[j]
                if q.gold_label is None:
                    continue
                bucket, cap = (pos, ds.n_pos) if q.gold_label == "respond" else (neg, ds.n_neg)
                if cap is not None and len(bucket) >= cap:
                    continue
                bucket.append(backbone.prefill(engine.context(), q.text))
    if ds.balance:
        n = min(len(pos), len(neg))
        pos, neg = pos[:n], neg[:n]
    d = backbone.hidden_dim
    states = np.array(pos + neg, dtype=np.float64).reshape(-1, 1, d)
    labels = np.array([RESPOND] * len(pos) + [WAIT] * len(neg), dtype=np.int64)
    return HiddenStateBatch(states, labels)
