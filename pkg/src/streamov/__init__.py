"""Streaming audio-visual memory, evidence routing and Respond/Wait triggering."""

__version__ = "0.1.0"
