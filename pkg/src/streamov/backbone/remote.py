"""HTTP client for a remote backbone, plus a small reference server.

Wire format: JSON over HTTP POST to ``/v1/embed``, ``/v1/prefill`` and
``/v1/generate``. Every call is idempotent, so one retry after a transport
failure or a 5xx is safe.
"""

from __future__ import annotations

import json
import logging
import os
import socket
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

import numpy as np

from ..errors import BackboneError, MalformedContext, ProtocolError, StreamOVError, Timeout, TransportError
from ..ingest import NORM_TOL, ObservationRecord, decode_observation, encode_observation
from .port import BackbonePort

log = logging.getLogger(__name__)

TOKEN_ENV = "STREAMOV_BACKBONE_TOKEN"


def _post_once(url: str, body: bytes, timeout: float, headers: dict[str, str]) -> Any:
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        text = exc.read().decode("utf-8", "replace")
        raise ProtocolError(exc.code, text) from None
    except (socket.timeout, TimeoutError) as exc:
        raise Timeout(f"no response from {url} within {timeout}s") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise Timeout(f"no response from {url} within {timeout}s") from exc
        raise TransportError(f"{url}: {exc.reason}") from exc
    except (ConnectionError, OSError) as exc:
        raise TransportError(f"{url}: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        raise ProtocolError(200, raw.decode("utf-8", "replace")) from None


def remote_call(endpoint: str, path: str, request: dict[str, Any], timeout: float = 30.0) -> Any:
    """POST ``request`` as JSON; retry once on transport errors and 5xx."""
    url = endpoint.rstrip("/") + path
    headers = {"Content-Type": "application/json; charset=utf-8"}
    token = os.environ.get(TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    body = json.dumps(request).encode("utf-8")
    for attempt in (1, 2):
        try:
            return _post_once(url, body, timeout, headers)
        except ProtocolError as exc:
            if exc.status < 500 or attempt == 2:
                raise
            log.warning("retrying %s after status %d", url, exc.status)
        except TransportError as exc:
            if attempt == 2:
                raise
            log.warning("retrying %s after %s", url, exc)
    raise AssertionError("unreachable")


def _unit(vec: Any, dim: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(vec, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProtocolError(200, f"{what} is not a float array") from None
    if arr.shape != (dim,) or not np.all(np.isfinite(arr)):
        raise ProtocolError(200, f"{what} must be {dim} finite floats")
    if abs(float(np.linalg.norm(arr)) - 1.0) > NORM_TOL:
        raise ProtocolError(200, f"{what} is not unit-norm")
    return arr


class RemoteBackbone:
    def __init__(self, endpoint: str, emb_dim: int, hidden_dim: int, timeout_s: float = 30.0, max_in_flight: int = 4):
        self.endpoint = endpoint
        self.emb_dim = emb_dim
        self.hidden_dim = hidden_dim
        self.timeout_s = timeout_s
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _call(self, path: str, request: dict[str, Any]) -> dict[str, Any]:
        with self._slots:
            resp = remote_call(self.endpoint, path, request, self.timeout_s)
        if not isinstance(resp, dict):
            raise ProtocolError(200, "response body must be a JSON object")
        return resp

    def _embed(self, kind: str, payload: Any) -> np.ndarray:
        resp = self._call("/v1/embed", {"kind": kind, "payload": payload})
        return _unit(resp.get("vec"), self.emb_dim, "embedding")

    def embed_text(self, text: str) -> np.ndarray:
        return self._embed("text", text)

    def embed_visual(self, obs: ObservationRecord) -> np.ndarray:
        return self._embed("visual", encode_observation(obs))

    def embed_audio(self, obs: ObservationRecord) -> np.ndarray:
        return self._embed("audio", encode_observation(obs))

    def prefill(self, context: dict[str, Any], query: str) -> np.ndarray:
        resp = self._call("/v1/prefill", {"context": context, "query": query})
        return _unit(resp.get("h0"), self.hidden_dim, "h0")

    def generate(self, context: dict[str, Any], query: str) -> str:
        resp = self._call("/v1/generate", {"context": context, "query": query})
        text = resp.get("text")
        if not isinstance(text, str):
            raise ProtocolError(200, "generate response lacks text")
        return text


class _NoRoute(Exception):
    pass


def _dispatch(backbone: BackbonePort, path: str, req: dict[str, Any]) -> dict[str, Any]:
    if path == "/v1/embed":
        kind, payload = req["kind"], req["payload"]
        if kind == "text":
            vec = backbone.embed_text(str(payload))
        elif kind in ("visual", "audio"):
            obs = decode_observation(payload, sample_rate=16000)
            vec = backbone.embed_visual(obs) if kind == "visual" else backbone.embed_audio(obs)
        else:
            raise ValueError(f"unknown embed kind {kind!r}")
        return {"vec": vec.tolist()}
    if path == "/v1/prefill":
        return {"h0": backbone.prefill(req["context"], str(req["query"])).tolist()}
    if path == "/v1/generate":
        return {"text": backbone.generate(req["context"], str(req["query"]))}
    raise _NoRoute(path)


def serve_backbone(backbone: BackbonePort, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Expose ``backbone`` over the wire protocol; caller runs ``serve_forever``."""

    class Handler(BackboneHTTPHandler):
        pass

    Handler.backbone = backbone
    return ThreadingHTTPServer((host, port), Handler)


class BackboneHTTPHandler(BaseHTTPRequestHandler):
    backbone: BackbonePort

    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("%s " + fmt, self.address_string(), *args)

    def _reply(self, status: int, payload: dict[str, Any]) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:  # noqa: N802
        length = int(self.headers.get("Content-Length", 0))
        try:
            req = json.loads(self.rfile.read(length))
            out = _dispatch(self.backbone, self.path, req)
        except _NoRoute:
            self._reply(404, {"error": f"no route {self.path}"})
        except BackboneError as exc:
            status = 400 if isinstance(exc, MalformedContext) else 502
            self._reply(status, {"error": str(exc)})
        except (KeyError, TypeError, ValueError, StreamOVError) as exc:
            self._reply(400, {"error": str(exc)})
        else:
            self._reply(200, out)
