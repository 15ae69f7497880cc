"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class StreamOVError(Exception):
    """Base class for all package errors."""


class InputError(StreamOVError):
    """Bad user input; the CLI maps these to exit code 2."""


class ParseError(InputError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(InputError):
    """A domain invariant does not hold; the message names it."""


class EmptySession(InputError):
    pass


class ConfigError(InputError):
    pass


class RangeError(InputError):
    pass


class MissingGold(InputError):
    pass


class ShapeMismatch(StreamOVError, ValueError):
    pass


class DimensionMismatch(StreamOVError, ValueError):
    pass


class MissingPayload(StreamOVError, KeyError):
    pass


class BackboneError(StreamOVError):
    """Anything that went wrong inside the backbone port (exit code 3)."""


class MalformedContext(BackboneError):
    pass


class TransportError(BackboneError):
    pass


class Timeout(TransportError):
    pass


class ProtocolError(BackboneError):
    def __init__(self, status: int, body: str):
        super().__init__(f"backbone returned {status}: {body[:200]}")
        self.status = status
        self.body = body[:200]

