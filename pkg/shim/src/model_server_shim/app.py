"""The HTTP application: three wire-protocol routes in front of the adapters.

Request/response bodies follow the evaluation toolkit's protocol exactly:

    POST /v1/vqa      {"image_png_b64": "...", "question": "..."} -> {"answer": "..."}
    POST /v1/iqa      {"image_png_b64": "..."}                    -> {"score": <0..1>}
    POST /v1/generate {"prompt": "..."}                           -> {"text": "..."}

Every error is a non-2xx JSON body {"error": "<message>"}. Responses carry the
serving checkpoint's identity in the X-Backend-Id header. Inference is
throttled per role; excess requests queue on the semaphore.
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import io
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image
from starlette.concurrency import run_in_threadpool

from . import adapters
from .config import ShimConfig

logger = logging.getLogger(__name__)


class RequestError(Exception):
    """Client-side problem; becomes a 4xx error JSON."""

    def __init__(self, message: str, status: int = 400):
        super().__init__(message)
        self.status = status


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _header_safe(value: str, limit: int = 200) -> str:
    """Model ids can hold arbitrary text; headers cannot."""
    cleaned = "".join(c if c.isprintable() else " " for c in value)
    return cleaned[:limit]


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception as exc:
        raise RequestError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise RequestError("request body must be a JSON object")
    return body


def _require_str(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str) or not value:
        raise RequestError(f"missing or non-string field {key!r}")
    return value


def _decode_image(body: dict) -> Image.Image:
    encoded = _require_str(body, "image_png_b64")
    try:
        raw = base64.b64decode(encoded, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise RequestError(f"image_png_b64 is not valid base64: {exc}") from exc
    try:
        image = Image.open(io.BytesIO(raw))
        image.load()
    except Exception as exc:
        raise RequestError(f"image bytes do not decode: {exc}") from exc
    return image


def create_app(
    config: ShimConfig,
    vqa: adapters.VqaModel | None = None,
    iqa: adapters.IqaModel | None = None,
    llm: adapters.TextModel | None = None,
) -> FastAPI:
    """Build the server; adapters may be injected (tests) or loaded per config.

    Checkpoint loading happens here, so a bad checkpoint fails startup rather
    than the first request.
    """
    if vqa is None and config.vqa_model:
        vqa = adapters.load_vqa(config.vqa_model, config.device)
    if iqa is None and config.iqa_model:
        iqa = adapters.load_iqa(config.iqa_model, config.device)
    if llm is None and config.llm_model:
        llm = adapters.load_llm(config.llm_model)
    if vqa is None and iqa is None and llm is None:
        raise RuntimeError("no role enabled: configure or inject at least one model")

    app = FastAPI(title="model-server-shim", docs_url=None, redoc_url=None)
    limits = {
        "vqa": asyncio.Semaphore(config.max_concurrent),
        "iqa": asyncio.Semaphore(config.max_concurrent),
        "llm": asyncio.Semaphore(config.max_concurrent),
    }

    @app.exception_handler(RequestError)
    async def _handle_request_error(request: Request, exc: RequestError):
        return _error(exc.status, str(exc))

    @app.post("/v1/vqa")
    async def vqa_route(request: Request):
        if vqa is None:
            return _error(404, "vqa role not enabled")
        body = await _json_body(request)
        image = _decode_image(body)
        question = _require_str(body, "question")
        async with limits["vqa"]:
            try:
                answer = await run_in_threadpool(vqa.answer, image, question)
            except Exception as exc:
                logger.exception("vqa inference failed")
                return _error(500, f"vqa inference failed: {exc}")
        return JSONResponse({"answer": str(answer)},
                            headers={"X-Backend-Id": _header_safe(vqa.model_id)})

    @app.post("/v1/iqa")
    async def iqa_route(request: Request):
        if iqa is None:
            return _error(404, "iqa role not enabled")
        body = await _json_body(request)
        image = _decode_image(body)
        async with limits["iqa"]:
            try:
                native = await run_in_threadpool(iqa.score, image)
            except Exception as exc:
                logger.exception("iqa inference failed")
                return _error(500, f"iqa inference failed: {exc}")
        # the wire protocol promises [0, 1]; map the model's native score into it
        score = min(max(float(native), 0.0), 1.0)
        return JSONResponse({"score": score}, headers={"X-Backend-Id": _header_safe(iqa.model_id)})

    @app.post("/v1/generate")
    async def generate_route(request: Request):
        if llm is None:
            return _error(404, "llm role not enabled")
        body = await _json_body(request)
        prompt = _require_str(body, "prompt")
        async with limits["llm"]:
            try:
                text = await run_in_threadpool(llm.generate, prompt)
            except Exception as exc:
                logger.exception("generation failed")
                return _error(500, f"generation failed: {exc}")
        return JSONResponse({"text": str(text)}, headers={"X-Backend-Id": _header_safe(llm.model_id)})

    return app
