"""Slow, independent reference implementations used to check the engine.

Nothing here imports the engine code paths it is meant to check: ranks,
fusion and the trigger forward pass are re-derived from scratch in
extended precision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class OracleConfig:
    fd_eps: float = 1e-5
    trials: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.fd_eps > 0:
            raise ValueError("fd_eps must be > 0")


# -- memory -------------------------------------------------------------------


def global_topk(history: Iterable[tuple[int, float, float]], k: int) -> set[int]:
    """Ids of the k best (id, t, B) records: highest B, then earliest t, then id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(history, key=lambda rec: (-rec[2], rec[1], rec[0]))
    return {rec[0] for rec in ranked[:k]}


# -- evidence -----------------------------------------------------------------


_LD = np.longdouble


@dataclass(frozen=True)
class NaiveEvidence:
    s_v: np.longdouble
    s_a: np.longdouble
    s_cob: np.longdouble
    s_qv: np.longdouble
    s_qa: np.longdouble
    s_qa_gated: np.longdouble
    e_v: np.longdouble
    e_a: np.longdouble
    e_av: np.longdouble
    e_v_hat: np.longdouble
    e_a_hat: np.longdouble
    base: np.longdouble
    route: str


def naive_ranks(values: Sequence[float]) -> list[np.longdouble]:
    """Count-based ranks: how many elements precede each one in (value, position) order."""
    n = len(values)
    if n == 1:
        return [_LD(1)]
    out = []
    for i in range(n):
        below = sum(1 for j in range(n) if values[j] < values[i] or (values[j] == values[i] and j < i))
        out.append(_LD(below) / _LD(n - 1))
    return out


def naive_fuse(s_qv, s_v, s_qa, s_a, s_cob) -> NaiveEvidence:
    """Every formula written out literally, in extended precision.

    ``s_qa`` is the ungated audio relevance; the gate is applied here.
    """
    s_qv, s_v, s_qa, s_a, s_cob = (_LD(x) for x in (s_qv, s_v, s_qa, s_a, s_cob))
    zero = _LD(0)
    gate = s_a if s_a >= s_cob else s_cob
    s_qa_gated = s_qa * gate
    e_v = s_qv if s_qv >= s_v else s_v
    e_a = s_qa_gated if s_qa_gated >= s_a else s_a
    semantic = s_qv if s_qv <= s_qa_gated else s_qa_gated
    burst = e_v
    if e_a < burst:
        burst = e_a
    if s_cob < burst:
        burst = s_cob
    e_av = semantic if semantic >= burst else burst
    e_v_hat = e_v - e_av if e_v - e_av > 0 else zero
    e_a_hat = e_a - e_av if e_a - e_av > 0 else zero
    base = e_av
    if e_v_hat > base:
        base = e_v_hat
    if e_a_hat > base:
        base = e_a_hat
    if e_av == base:
        label = "AV"
    elif e_v_hat == base:
        label = "V"
    else:
        label = "A"
    return NaiveEvidence(zero, zero, zero, s_qv, s_qa, s_qa_gated, e_v, e_a, e_av, e_v_hat, e_a_hat, base, label)


def naive_evidence(
    raw: Sequence[tuple[float, float, float, float, float]], query: bool
) -> list[NaiveEvidence]:
    """Evidence for a window of raw (sv, sa, scob, sqv, sqa) tuples in time order."""
    cols = list(zip(*raw))
    s_v, s_a, s_cob = (naive_ranks(c) for c in cols[:3])
    if query:
        s_qv, s_qa = naive_ranks(cols[3]), naive_ranks(cols[4])
    else:
        s_qv = s_qa = [_LD(0)] * len(raw)
    out = []
    for i in range(len(raw)):
        ev = naive_fuse(s_qv[i], s_v[i], s_qa[i], s_a[i], s_cob[i])
        out.append(replace(ev, s_v=s_v[i], s_a=s_a[i], s_cob=s_cob[i]))
    return out


# -- trigger ------------------------------------------------------------------


def naive_forward(params, hs) -> np.ndarray:
    """Logits via explicit loops in extended precision."""
    ld = np.longdouble
    q = [ld(x) for x in np.asarray(params.q_tr)]
    w1 = np.asarray(params.w1)
    b1 = np.asarray(params.b1)
    w2 = np.asarray(params.w2)
    b2 = np.asarray(params.b2)
    rows = [[ld(x) for x in h] for h in np.atleast_2d(np.asarray(hs))]
    d = len(q)
    scale = np.sqrt(ld(d))
    scores = [sum((a * b for a, b in zip(q, h)), ld(0)) / scale for h in rows]
    top = max(scores)
    weights = [np.exp(s - top) for s in scores]
    total = sum(weights, ld(0))
    attn = [w / total for w in weights]
    z = [sum((attn[k] * rows[k][i] for k in range(len(rows))), ld(0)) for i in range(d)]
    hidden = []
    for j in range(b1.shape[0]):
        u = sum((z[i] * ld(w1[i, j]) for i in range(d)), ld(b1[j]))
        hidden.append(u if u > 0 else ld(0))
    logits = []
    for c in range(2):
        logits.append(sum((hidden[j] * ld(w2[j, c]) for j in range(len(hidden))), ld(b2[c])))
    return np.array(logits, dtype=np.longdouble)


def naive_loss(params, hs, label: int) -> float:
    logits = naive_forward(params, hs)
    top = max(logits)
    lse = top + np.log(sum(np.exp(x - top) for x in logits))
    return float(lse - logits[label])


def fd_gradients(params, hs, label: int, eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences of the loss, one coordinate at a time."""
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    grads = {}
    for name in ("q_tr", "w1", "b1", "w2", "b2"):
        arr = getattr(params, name)
        g = np.zeros_like(arr)
        for idx in itertools.product(*(range(n) for n in arr.shape)):
            keep = arr[idx]
            arr[idx] = keep + eps
            up = _loss64(params, hs, label)
            arr[idx] = keep - eps
            down = _loss64(params, hs, label)
            arr[idx] = keep
            g[idx] = (up - down) / (2 * eps)
        grads[name] = g
    return grads


def _loss64(params, hs, label: int) -> float:
    """Straight-line 64-bit loss used by the finite differences."""
    hs = np.atleast_2d(np.asarray(hs, dtype=np.float64))
    s = hs @ params.q_tr / np.sqrt(hs.shape[1])
    a = np.exp(s - s.max())
    a /= a.sum()
    z = a @ hs
    r = np.maximum(z @ params.w1 + params.b1, 0.0)
    logits = r @ params.w2 + params.b2
    m = logits.max()
    return float(m + np.log(np.exp(logits - m).sum()) - logits[label])


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / max(||a||, ||b||), zero when both vanish."""
    den = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    if den == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b)) / den
