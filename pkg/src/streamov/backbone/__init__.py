from .port import BackbonePort
from .remote import RemoteBackbone, remote_call, serve_backbone
from .stub import NO_EVIDENCE, StubBackbone, stub_embed

__all__ = [
    "BackbonePort",
    "make_backbone",
    "NO_EVIDENCE",
    "RemoteBackbone",
    "StubBackbone",
    "remote_call",
    "serve_backbone",
    "stub_embed",
]


def make_backbone(cfg) -> BackbonePort:
    """Backbone selected by a :class:`streamov.config.Config`."""
    bb = cfg.backbone
    if bb.mode == "remote":
        return RemoteBackbone(bb.endpoint, cfg.emb_dim, cfg.trigger.d, bb.timeout_s, bb.max_in_flight)
    return StubBackbone(cfg.emb_dim, cfg.trigger.d, bb.seed, bb.evidence_gain)
