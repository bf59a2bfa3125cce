"""Content-addressed response cache: one file per entry, atomic writes.

Keys hash the canonical request content (role, backend identity, image bytes
digest, question/prompt text), never file paths, so moved files still hit.
Entries store the verbatim response JSON; a corrupt entry is treated as a
miss. Writes are atomic (temp file + rename), so concurrent readers never see
torn entries and last-writer-wins is safe because values for a key are
semantically identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..core import IqaScore
from .base import VqaResponse

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CacheKey:
    role: str
    backend_id: str
    digest: str

    @classmethod
    def for_request(
        cls,
        role: str,
        backend_id: str,
        body: dict[str, Any],
        image_bytes: bytes | None = None,
    ) -> "CacheKey":
        """Key a request by its content. Any byte change in image or text changes the key."""
        payload: dict[str, Any] = {"role": role, "backend_id": backend_id, "body": body}
        if image_bytes is not None:
            payload["image_sha256"] = hashlib.sha256(image_bytes).hexdigest()
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return cls(role=role, backend_id=backend_id,
                   digest=hashlib.sha256(canonical.encode("utf-8")).hexdigest())


class ResponseCache:
    """Directory-backed cache; filename = hex digest, content = response JSON."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path_for(self, key: CacheKey) -> Path:
        return self.directory / key.digest

    def get(self, key: CacheKey) -> dict[str, Any] | None:
        """Return the stored response object, or None on miss/corruption."""
        path = self.path_for(key)
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            return None
        try:
            parsed = json.loads(raw)
        except ValueError:
            logger.warning("corrupt cache entry %s; treating as miss", path.name)
            return None
        if not isinstance(parsed, dict):
            logger.warning("corrupt cache entry %s; treating as miss", path.name)
            return None
        return parsed

    def put(self, key: CacheKey, response_json: bytes) -> None:
        """Store the verbatim response JSON atomically."""
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(response_json)
            os.replace(tmp, self.path_for(key))
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


def cache_get(cache: ResponseCache, key: CacheKey) -> dict[str, Any] | None:
    return cache.get(key)


def cache_put(cache: ResponseCache, key: CacheKey, response_json: bytes) -> None:
    cache.put(key, response_json)


def _encode(payload: dict[str, Any]) -> bytes:
    return json.dumps(payload, sort_keys=True).encode("utf-8")


class CachedVqa:
    """Cache layer over any VQA source (HTTP or mock); transparent to scores."""

    def __init__(self, inner, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id

    def ask(self, image, question) -> VqaResponse:
        key = CacheKey.for_request(
            "vqa", self.backend_id, {"question": question.text}, image.png_bytes()
        )
        hit = self.cache.get(key)
        if hit is not None and isinstance(hit.get("answer"), str):
            return VqaResponse.from_raw(hit["answer"], 0.0, self.backend_id)
        response = self.inner.ask(image, question)
        self.cache.put(key, _encode({"answer": response.raw_answer}))
        return response


class CachedIqa:
    """Cache layer over any IQA source (HTTP or mock)."""

    def __init__(self, inner, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id

    def score(self, image) -> IqaScore:
        key = CacheKey.for_request("iqa", self.backend_id, {}, image.png_bytes())
        hit = self.cache.get(key)
        if hit is not None and isinstance(hit.get("score"), (int, float)):
            return IqaScore.from_raw(hit["score"], self.backend_id)
        response = self.inner.score(image)
        self.cache.put(key, _encode({"score": response.raw}))
        return response
