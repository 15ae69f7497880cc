from .dataset import DEFAULT_NEGATIVES, DEFAULT_POSITIVES, DatasetConfig, build_trigger_dataset
from .model import (
    RESPOND,
    WAIT,
    Decision,
    TriggerParams,
    decide,
    decide_from_logits,
    trigger_backward,
    trigger_forward,
    trigger_loss,
)
from .train import AdamW, HiddenStateBatch, predict, train_trigger

__all__ = [
    "AdamW",
    "DEFAULT_NEGATIVES",
    "DEFAULT_POSITIVES",
    "DatasetConfig",
    "Decision",
    "HiddenStateBatch",
    "RESPOND",
    "TriggerParams",
    "WAIT",
    "build_trigger_dataset",
    "decide",
    "decide_from_logits",
    "predict",
    "train_trigger",
    "trigger_backward",
    "trigger_forward",
    "trigger_loss",
]
