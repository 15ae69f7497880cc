"""Minibatch AdamW training for the trigger head."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..config import TriggerConfig
from ..errors import ConfigError
from .model import TriggerParams, batch_loss_and_grads, predict_proba

log = logging.getLogger(__name__)


@dataclass
class HiddenStateBatch:
    """Prefix hidden states (n, k+1, d) with binary labels (1 = Respond)."""

    states: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim == 2:
            self.states = self.states[:, None, :]
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.states.ndim != 3 or self.states.shape[0] != self.labels.shape[0]:
            raise ValueError("states must be (n, k+1, d) with one label per example")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, idx: np.ndarray) -> "HiddenStateBatch":
        return HiddenStateBatch(self.states[idx], self.labels[idx])

    def split(self, holdout: float, seed: int = 0) -> tuple["HiddenStateBatch", "HiddenStateBatch"]:
        """Stratified train/held-out split."""
        rng = np.random.default_rng(seed)
        train, test = [], []
        for cls in (0, 1):
            idx = np.flatnonzero(self.labels == cls)
            rng.shuffle(idx)
            cut = int(round(len(idx) * holdout))
            test.append(idx[:cut])
            train.append(idx[cut:])
        return self.subset(np.sort(np.concatenate(train))), self.subset(np.sort(np.concatenate(test)))


class AdamW:
    def __init__(self, params: TriggerParams, lr: float, weight_decay: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = {n: np.zeros_like(a) for n, a in params.arrays().items()}
        self.v = {n: np.zeros_like(a) for n, a in params.arrays().items()}

    def step(self, params: TriggerParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        c1 = 1.0 - self.b1**self.step_count
        c2 = 1.0 - self.b2**self.step_count
        for name, arr in params.arrays().items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            arr *= 1.0 - self.lr * self.weight_decay
            arr -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_trigger(
    data: HiddenStateBatch, cfg: TriggerConfig, init: TriggerParams | None = None
) -> tuple[TriggerParams, list[float]]:
    """Train from ``init`` (or a seeded init); returns params and per-epoch mean loss."""
    # lr == 0 is accepted as a dry run that leaves params untouched
    if not cfg.lr >= 0 or cfg.batch <= 0:
        raise ConfigError("lr must be >= 0 and batch must be positive")
    if len(data) == 0:
        raise ConfigError("training set is empty")
    d = data.states.shape[-1]
    params = init.copy() if init is not None else TriggerParams.init(d, cfg.h, cfg.seed)
    params.check()
    opt = AdamW(params, cfg.lr, cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    history: list[float] = []
    n = len(data)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch):
            idx = order[lo : lo + cfg.batch]
            loss, grads = batch_loss_and_grads(params, data.states[idx], data.labels[idx])
            if cfg.lr > 0:
                opt.step(params, grads)
            total += loss * len(idx)
        history.append(total / n)
        log.info("epoch %d loss %.5f", epoch + 1, history[-1])
    params.meta = {"seed": cfg.seed, "lr": cfg.lr, "epochs": cfg.epochs, "batch": cfg.batch}
    return params, history


def predict(params: TriggerParams, data: HiddenStateBatch, threshold: float | None = None) -> np.ndarray:
    p = predict_proba(params, data.states)
    if threshold is None:
        return (p > 0.5).astype(np.int64)
    return (p >= threshold).astype(np.int64)
