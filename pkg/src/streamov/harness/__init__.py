from .engine import SessionTrace, StreamingEngine, run_session, stream_session
from .evaluation import TriggerMetrics, eval_trigger, quality_filter
from .report import emit_report
from .synthetic import SynthConfig, SyntheticSession, gen_synthetic_session

__all__ = [
    "SessionTrace",
    "StreamingEngine",
    "SynthConfig",
    "SyntheticSession",
    "TriggerMetrics",
    "emit_report",
    "eval_trigger",
    "gen_synthetic_session",
    "quality_filter",
    "run_session",
    "stream_session",
]
