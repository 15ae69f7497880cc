"""Run configuration and its JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

DEFAULT_BUDGET = 64


@dataclass(frozen=True)
class TriggerConfig:
    d: int = 256
    h: int = 512
    lr: float = 3e-4
    batch: int = 32
    epochs: int = 20
    seed: int = 0
    weight_decay: float = 0.01
    threshold: float | None = None

    def validate(self) -> None:
        if self.lr < 0 or not self.lr == self.lr:
            raise ConfigError("trigger.lr must be >= 0")
        if self.batch < 1:
            raise ConfigError("trigger.batch must be >= 1")
        if self.epochs < 0:
            raise ConfigError("trigger.epochs must be >= 0")
        if self.d < 1 or self.h < 1:
            raise ConfigError("trigger.d and trigger.h must be >= 1")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("trigger.threshold must lie in [0, 1]")


@dataclass(frozen=True)
class BackboneConfig:
    mode: str = "stub"
    endpoint: str = ""
    timeout_s: float = 30.0
    seed: int = 0
    evidence_gain: float = 2.0
    max_in_flight: int = 4

    def validate(self) -> None:
        if self.mode not in ("stub", "remote"):
            raise ConfigError(f"backbone.mode must be 'stub' or 'remote', got {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ConfigError("backbone.endpoint is required in remote mode")
        if self.timeout_s <= 0:
            raise ConfigError("backbone.timeout_s must be > 0")


@dataclass(frozen=True)
class Config:
    window_w: int = 8
    budget: int = DEFAULT_BUDGET
    k_s: int | None = None
    k_l: int | None = None
    emb_dim: int = 64
    audio_default: float = 0.5
    # accepted for forward compatibility; queries are scored at arrival only
    eval_window_s: float = 0.0
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)

    @property
    def short_k(self) -> int:
        return self.k_s if self.k_s is not None else max(1, self.budget // 4)

    @property
    def long_k(self) -> int:
        return self.k_l if self.k_l is not None else max(1, self.budget - self.short_k)

    def validate(self) -> "Config":
        if self.window_w < 1:
            raise ConfigError("window_w must be >= 1")
        if self.budget < 2:
            raise ConfigError("budget must be >= 2")
        if self.short_k < 1 or self.long_k < 1:
            raise ConfigError("k_s and k_l must be >= 1")
        if self.short_k + self.long_k > self.budget:
            raise ConfigError(
                f"k_s + k_l = {self.short_k + self.long_k} exceeds budget {self.budget}"
            )
        if self.emb_dim < 2:
            raise ConfigError("emb_dim must be >= 2")
        if not 0.0 <= self.audio_default <= 1.0:
            raise ConfigError("audio_default must lie in [0, 1]")
        self.trigger.validate()
        self.backbone.validate()
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "Config":
        raw = dict(raw)
        try:
            trig = TriggerConfig(**raw.pop("trigger", {}))
            bb = BackboneConfig(**raw.pop("backbone", {}))
            cfg = cls(trigger=trig, backbone=bb, **raw)
        except TypeError as exc:
            raise ConfigError(f"unknown or malformed config field: {exc}") from None
        return cfg.validate()


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config().validate()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return Config.from_dict(raw)
