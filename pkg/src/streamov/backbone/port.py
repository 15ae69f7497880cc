"""The boundary between the streaming engine and any multimodal model."""

from __future__ import annotations

from typing import Any, Protocol, runtime_checkable

import numpy as np

from ..ingest import ObservationRecord


@runtime_checkable
class BackbonePort(Protocol):
    emb_dim: int
    hidden_dim: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_visual(self, obs: ObservationRecord) -> np.ndarray: ...

    def embed_audio(self, obs: ObservationRecord) -> np.ndarray: ...

    def prefill(self, context: dict[str, Any], query: str) -> np.ndarray: ...

    def generate(self, context: dict[str, Any], query: str) -> str: ...
