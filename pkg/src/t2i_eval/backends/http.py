"""JSON-over-HTTP clients for the three backend roles.

Wire protocol (all POST, JSON bodies, UTF-8):

    POST /v1/vqa      {"image_png_b64": "...", "question": "..."} -> {"answer": "..."}
    POST /v1/iqa      {"image_png_b64": "..."}                    -> {"score": <number>}
    POST /v1/generate {"prompt": "..."}                           -> {"text": "..."}

Non-2xx responses carry {"error": "<message>"}. Transport failures get one
automatic retry; model-level errors are never retried.
"""

from __future__ import annotations

import base64
import threading
import time
from typing import Any

import requests

from ..core import IqaScore
from ..errors import BackendError, ProtocolError, TransportError
from ..qgen import Question
from .base import BackendEndpoint, Role, VqaResponse
from .cache import CacheKey, ResponseCache

#: Raw IQA values beyond this are treated as a broken backend, not data.
IQA_RAW_SANITY_BOUND = 1000.0

_TRANSPORT_RETRIES = 1


def _post_json(
    endpoint: BackendEndpoint,
    route: str,
    body: dict[str, Any],
    token: str | None = None,
) -> tuple[dict[str, Any], bytes]:
    """POST a wire-protocol request; returns (parsed JSON, verbatim bytes)."""
    url = endpoint.url.rstrip("/") + route
    headers = {}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    last_exc: Exception | None = None
    for _ in range(_TRANSPORT_RETRIES + 1):
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if not 200 <= resp.status_code < 300:
            try:
                message = resp.json().get("error", resp.text)
            except ValueError:
                message = resp.text
            raise BackendError(
                f"{endpoint.backend_id} at {url} returned {resp.status_code}: {message}",
                status=resp.status_code,
            )
        try:
            parsed = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{endpoint.backend_id} at {url} sent non-JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ProtocolError(f"{endpoint.backend_id} at {url} sent a non-object response")
        return parsed, resp.content
    raise TransportError(
        f"cannot reach {endpoint.backend_id} at {endpoint.url}: {last_exc}"
    ) from last_exc


def vqa_ask(
    endpoint: BackendEndpoint,
    image_png: bytes,
    question: Question,
    cache: ResponseCache | None = None,
    token: str | None = None,
) -> VqaResponse:
    """Ask one question about one image; consults the cache first."""
    if endpoint.role is not Role.VQA:
        raise ValueError(f"endpoint role is {endpoint.role.value}, expected vqa")
    key = CacheKey.for_request("vqa", endpoint.backend_id, {"question": question.text}, image_png)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None and isinstance(hit.get("answer"), str):
            return VqaResponse.from_raw(hit["answer"], 0.0, endpoint.backend_id)
    body = {
        "image_png_b64": base64.b64encode(image_png).decode("ascii"),
        "question": question.text,
    }
    started = time.monotonic()
    parsed, raw = _post_json(endpoint, "/v1/vqa", body, token=token)
    latency = time.monotonic() - started
    answer = parsed.get("answer")
    if not isinstance(answer, str):
        raise ProtocolError(f"{endpoint.backend_id} /v1/vqa response missing string 'answer'")
    if cache is not None:
        cache.put(key, raw)
    return VqaResponse.from_raw(answer, latency, endpoint.backend_id)


def iqa_score(
    endpoint: BackendEndpoint,
    image_png: bytes,
    cache: ResponseCache | None = None,
    token: str | None = None,
) -> IqaScore:
    """Score one image's quality; raw value is preserved, clamped into [0, 1]."""
    if endpoint.role is not Role.IQA:
        raise ValueError(f"endpoint role is {endpoint.role.value}, expected iqa")
    key = CacheKey.for_request("iqa", endpoint.backend_id, {}, image_png)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None and isinstance(hit.get("score"), (int, float)):
            return IqaScore.from_raw(hit["score"], endpoint.backend_id)
    body = {"image_png_b64": base64.b64encode(image_png).decode("ascii")}
    parsed, raw = _post_json(endpoint, "/v1/iqa", body, token=token)
    score = parsed.get("score")
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise ProtocolError(f"{endpoint.backend_id} /v1/iqa response missing numeric 'score'")
    if not -IQA_RAW_SANITY_BOUND <= float(score) <= IQA_RAW_SANITY_BOUND:
        raise ProtocolError(
            f"{endpoint.backend_id} /v1/iqa score {score} outside sanity bound "
            f"[-{IQA_RAW_SANITY_BOUND}, {IQA_RAW_SANITY_BOUND}]"
        )
    if cache is not None:
        cache.put(key, raw)
    return IqaScore.from_raw(float(score), endpoint.backend_id)


def llm_generate(
    endpoint: BackendEndpoint,
    prompt: str,
    cache: ResponseCache | None = None,
    token: str | None = None,
) -> str:
    """Send a generation prompt; returns the raw text (one question per line)."""
    if endpoint.role is not Role.LLM:
        raise ValueError(f"endpoint role is {endpoint.role.value}, expected llm")
    key = CacheKey.for_request("llm", endpoint.backend_id, {"prompt": prompt})
    if cache is not None:
        hit = cache.get(key)
        if hit is not None and isinstance(hit.get("text"), str):
            return hit["text"]
    parsed, raw = _post_json(endpoint, "/v1/generate", {"prompt": prompt}, token=token)
    text = parsed.get("text")
    if not isinstance(text, str):
        raise ProtocolError(f"{endpoint.backend_id} /v1/generate response missing string 'text'")
    if cache is not None:
        cache.put(key, raw)
    return text


#: In-flight requests allowed per endpoint unless configured otherwise.
DEFAULT_MAX_IN_FLIGHT = 4


class HttpVqa:
    """VQA source over HTTP, usable wherever the harness expects a VQA source.

    Shareable across threads; at most `max_in_flight` requests run against the
    endpoint at once, the rest queue.
    """

    def __init__(self, endpoint: BackendEndpoint, cache: ResponseCache | None = None,
                 token: str | None = None, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        self.endpoint = endpoint
        self.cache = cache
        self.token = token
        self.backend_id = endpoint.backend_id
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def ask(self, image, question: Question) -> VqaResponse:
        with self._slots:
            return vqa_ask(self.endpoint, image.png_bytes(), question,
                           cache=self.cache, token=self.token)


class HttpIqa:
    """IQA source over HTTP."""

    def __init__(self, endpoint: BackendEndpoint, cache: ResponseCache | None = None,
                 token: str | None = None, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        self.endpoint = endpoint
        self.cache = cache
        self.token = token
        self.backend_id = endpoint.backend_id
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def score(self, image) -> IqaScore:
        with self._slots:
            return iqa_score(self.endpoint, image.png_bytes(),
                             cache=self.cache, token=self.token)


class HttpLlm:
    """LLM backend over HTTP; satisfies the qgen LlmBackend protocol.

    No cache by default: question-generation retries must reach the model, and
    replaying a cached nonconforming response would make them pointless.
    """

    def __init__(self, endpoint: BackendEndpoint, cache: ResponseCache | None = None,
                 token: str | None = None, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        self.endpoint = endpoint
        self.cache = cache
        self.token = token
        self.backend_id = endpoint.backend_id
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def generate(self, prompt: str) -> str:
        with self._slots:
            return llm_generate(self.endpoint, prompt, cache=self.cache, token=self.token)
