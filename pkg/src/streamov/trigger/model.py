"""Cross-attention trigger head: a learned query pools the prefix hidden
states, and a one-hidden-layer MLP maps the pooled vector to Respond/Wait
logits. Gradients are derived by hand.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DimensionMismatch

WAIT = 0
RESPOND = 1


class Decision(str, enum.Enum):
    RESPOND = "respond"
    WAIT = "wait"


@dataclass
class TriggerParams:
    q_tr: np.ndarray  # (d,)
    w1: np.ndarray  # (d, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, 2)
    b2: np.ndarray  # (2,)
    meta: dict[str, Any] = field(default_factory=dict)

    NAMES = ("q_tr", "w1", "b1", "w2", "b2")

    @property
    def d(self) -> int:
        return self.q_tr.shape[0]

    @property
    def h(self) -> int:
        return self.b1.shape[0]

    @classmethod
    def zeros(cls, d: int, h: int) -> "TriggerParams":
        return cls(np.zeros(d), np.zeros((d, h)), np.zeros(h), np.zeros((h, 2)), np.zeros(2))

    @classmethod
    def init(cls, d: int, h: int, seed: int = 0) -> "TriggerParams":
        rng = np.random.default_rng(seed)
        return cls(
            q_tr=rng.standard_normal(d) * 0.02,
            w1=rng.standard_normal((d, h)) * math.sqrt(2.0 / d),
            b1=np.zeros(h),
            w2=rng.standard_normal((h, 2)) * math.sqrt(1.0 / h),
            b2=np.zeros(2),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in self.NAMES}

    def copy(self) -> "TriggerParams":
        return TriggerParams(**{n: a.copy() for n, a in self.arrays().items()}, meta=dict(self.meta))

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays().values())

    def check(self) -> None:
        d, h = self.d, self.h
        want = {"q_tr": (d,), "w1": (d, h), "b1": (h,), "w2": (h, 2), "b2": (2,)}
        for name, arr in self.arrays().items():
            if arr.shape != want[name]:
                raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {want[name]}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")

    def to_json(self) -> dict[str, Any]:
        return {
            "d": self.d,
            "h": self.h,
            **{n: a.tolist() for n, a in self.arrays().items()},
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, raw: dict[str, Any]) -> "TriggerParams":
        p = cls(
            **{n: np.asarray(raw[n], dtype=np.float64) for n in cls.NAMES},
            meta=dict(raw.get("meta", {})),
        )
        if p.d != raw["d"] or p.h != raw["h"]:
            raise DimensionMismatch("declared d/h disagree with array shapes")
        p.check()
        return p

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TriggerParams":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _states(params: TriggerParams, hs: np.ndarray) -> np.ndarray:
    hs = np.atleast_2d(np.asarray(hs, dtype=np.float64))
    if hs.shape[0] < 1 or hs.shape[-1] != params.d:
        raise DimensionMismatch(f"hidden states {hs.shape} do not match d={params.d}")
    return hs


@dataclass
class _Cache:
    hs: np.ndarray
    attn: np.ndarray
    z: np.ndarray
    pre: np.ndarray
    act: np.ndarray
    logits: np.ndarray


def _forward(params: TriggerParams, hs: np.ndarray) -> _Cache:
    """Batched forward; ``hs`` is (batch, k+1, d)."""
    scores = hs @ params.q_tr / math.sqrt(params.d)
    attn = _softmax(scores)
    z = np.einsum("bk,bkd->bd", attn, hs)
    pre = z @ params.w1 + params.b1
    act = np.maximum(pre, 0.0)
    logits = act @ params.w2 + params.b2
    return _Cache(hs, attn, z, pre, act, logits)


def trigger_forward(params: TriggerParams, hs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Logits (2,) and attention weights (k+1,) for one prefix of hidden states."""
    c = _forward(params, _states(params, hs)[None])
    return c.logits[0], c.attn[0]


def trigger_loss(logits: np.ndarray, label: int) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    top = int(np.argmax(logits))
    m = float(logits[top])
    # log1p over the non-maximal terms keeps tiny losses representable
    rest = float(np.sum(np.exp(np.delete(logits, top) - m)))
    return (m - float(logits[label])) + math.log1p(rest)


def _backward(params: TriggerParams, c: _Cache, labels: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradients."""
    n = labels.shape[0]
    probs = _softmax(c.logits)
    m = c.logits.max(axis=1)
    lse = m + np.log(np.exp(c.logits - m[:, None]).sum(axis=1))
    loss = float(np.mean(lse - c.logits[np.arange(n), labels]))
    d_logits = probs.copy()
    d_logits[np.arange(n), labels] -= 1.0
    d_logits /= n
    g_w2 = c.act.T @ d_logits
    g_b2 = d_logits.sum(axis=0)
    d_pre = (d_logits @ params.w2.T) * (c.pre > 0)
    g_w1 = c.z.T @ d_pre
    g_b1 = d_pre.sum(axis=0)
    d_z = d_pre @ params.w1.T
    # z = sum_k a_k h_k ; a = softmax(H q / sqrt(d))
    d_attn = np.einsum("bkd,bd->bk", c.hs, d_z)
    d_scores = c.attn * (d_attn - np.sum(c.attn * d_attn, axis=1, keepdims=True))
    g_q = np.einsum("bk,bkd->d", d_scores, c.hs) / math.sqrt(params.d)
    return loss, {"q_tr": g_q, "w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def batch_loss_and_grads(
    params: TriggerParams, hs: np.ndarray, labels: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """``hs`` is (batch, k+1, d), every example sharing the same prefix length."""
    return _backward(params, _forward(params, hs), np.asarray(labels, dtype=np.int64))


def trigger_backward(params: TriggerParams, hs: np.ndarray, label: int) -> dict[str, np.ndarray]:
    hs = _states(params, hs)
    _, grads = batch_loss_and_grads(params, hs[None], np.array([label]))
    return grads


def predict_proba(params: TriggerParams, hs: np.ndarray) -> np.ndarray:
    """Respond probability for a batch (batch, k+1, d)."""
    return _softmax(_forward(params, hs).logits)[:, RESPOND]


def decide_from_logits(logits: np.ndarray, threshold: float | None = None) -> Decision:
    """Logits are indexed by label (WAIT=0, RESPOND=1); a tie waits."""
    if threshold is None:
        return Decision.RESPOND if logits[RESPOND] > logits[WAIT] else Decision.WAIT
    p = _softmax(np.asarray(logits, dtype=np.float64))[RESPOND]
    return Decision.RESPOND if p >= threshold else Decision.WAIT


def decide(params: TriggerParams, h0: np.ndarray, threshold: float | None = None) -> Decision:
    """Respond/Wait from the post-prefill state alone."""
    logits, _ = trigger_forward(params, np.asarray(h0)[None, :])
    return decide_from_logits(logits, threshold)


__all__ = [
    "Decision",
    "RESPOND",
    "TriggerParams",
    "WAIT",
    "batch_loss_and_grads",
    "decide",
    "decide_from_logits",
    "predict_proba",
    "trigger_backward",
    "trigger_forward",
    "trigger_loss",
]
