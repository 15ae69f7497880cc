"""Respond/Wait triggering metrics and the benchmark quality filter."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import MissingGold, RangeError
from .engine import SessionTrace

QUALITY_THRESHOLD = 35
QUALITY_DIMENSIONS = (
    "visual_dynamism",
    "narrative_coherence",
    "information_density",
    "av_alignment",
    "reasoning_value",
)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def f1(precision: float, recall: float) -> float:
    return _ratio(2 * precision * recall, precision + recall)


@dataclass(frozen=True)
class TriggerMetrics:
    precision_1: float
    recall_1: float
    precision_0: float
    recall_0: float
    f1_1: float
    f1_0: float
    macro_f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @classmethod
    def from_confusion(cls, tp: int, fp: int, fn: int, tn: int) -> "TriggerMetrics":
        p1, r1 = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        p0, r0 = _ratio(tn, tn + fn), _ratio(tn, tn + fp)
        return cls.from_rates(p1, r1, p0, r0, tp=tp, fp=fp, fn=fn, tn=tn)

    @classmethod
    def from_rates(cls, p1: float, r1: float, p0: float, r0: float, **counts: int) -> "TriggerMetrics":
        f1_1, f1_0 = f1(p1, r1), f1(p0, r0)
        return cls(p1, r1, p0, r0, f1_1, f1_0, (f1_1 + f1_0) / 2, **counts)

    def to_json(self) -> dict:
        return asdict(self)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "TriggerMetrics":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def metrics_from_labels(predicted: Iterable[int], gold: Iterable[int]) -> TriggerMetrics:
    """Class 1 is Respond, class 0 is Wait/silence."""
    tp = fp = fn = tn = 0
    for p, g in zip(predicted, gold, strict=True):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return TriggerMetrics.from_confusion(tp, fp, fn, tn)


def eval_trigger(
    traces: Iterable[SessionTrace], gold: Mapping[tuple[str, int], str] | None = None
) -> TriggerMetrics:
    """Score every query decision in ``traces``.

    ``gold`` maps (session id, query index) to "respond"/"silence"; labels
    recorded in the traces are used when it is omitted.
    """
    preds, labels = [], []
    for trace in traces:
        for d in trace.decisions:
            label = gold.get((trace.session_id, d.query_index)) if gold is not None else d.gold_label
            if label is None:
                raise MissingGold(f"session {trace.session_id!r} query {d.query_index} has no gold label")
            preds.append(int(d.decision == "respond"))
            labels.append(int(label == "respond"))
    return metrics_from_labels(preds, labels)


@dataclass(frozen=True)
class QualityVerdict:
    total: int
    keep: bool

    @property
    def recommendation(self) -> str:
        return "Keep" if self.keep else "Discard"


def quality_filter(scores: Iterable[int]) -> QualityVerdict:
    """Five 0-10 scores; keep when their sum reaches the threshold."""
    scores = list(scores)
    if len(scores) != len(QUALITY_DIMENSIONS):
        raise RangeError(f"expected {len(QUALITY_DIMENSIONS)} scores, got {len(scores)}")
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s <= 10:
            raise RangeError(f"score {s!r} is not an integer in [0, 10]")
    total = sum(scores)
    return QualityVerdict(total, total >= QUALITY_THRESHOLD)
