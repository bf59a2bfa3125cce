"""Model adapters behind the three serving roles.

Each adapter turns one checkpoint (or remote API) into a plain callable the
routes can use. Heavyweight imports happen lazily at load time so the shim
itself stays light; a checkpoint that cannot be loaded is a startup error.
"""

from __future__ import annotations

import os
from typing import Protocol

from PIL import Image


class VqaModel(Protocol):
    model_id: str

    def answer(self, image: Image.Image, question: str) -> str: ...


class IqaModel(Protocol):
    model_id: str

    def score(self, image: Image.Image) -> float: ...


class TextModel(Protocol):
    model_id: str

    def generate(self, prompt: str) -> str: ...


class ConstantVqa:
    """Answers every question the same way; for protocol tests and demos."""

    def __init__(self, answer: str):
        self.answer_text = answer
        self.model_id = f"constant:{answer}"

    def answer(self, image: Image.Image, question: str) -> str:
        return self.answer_text


class ConstantIqa:
    def __init__(self, value: float):
        self.value = float(value)
        self.model_id = f"constant:{value}"

    def score(self, image: Image.Image) -> float:
        return self.value


class ConstantText:
    def __init__(self, text: str):
        self.text = text
        self.model_id = f"constant:{text[:24]}"

    def generate(self, prompt: str) -> str:
        return self.text


class HfVqa:
    """VQA through a transformers pipeline (e.g. a BEIT-3-style checkpoint)."""

    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            from transformers import pipeline
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise RuntimeError("hf-vqa adapter needs the 'transformers' package") from exc
        try:
            self._pipeline = pipeline("visual-question-answering", model=model_id,
                                      device=device)
        except Exception as exc:
            raise RuntimeError(f"cannot load VQA checkpoint {model_id!r}: {exc}") from exc
        self.model_id = model_id

    def answer(self, image: Image.Image, question: str) -> str:
        results = self._pipeline(image=image, question=question, top_k=1)
        return str(results[0]["answer"])


class PyiqaModel:
    """No-reference IQA through pyiqa (e.g. the maniqa metric)."""

    def __init__(self, metric: str, device: str = "cpu"):
        try:
            import pyiqa
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise RuntimeError("pyiqa adapter needs the 'pyiqa' package") from exc
        try:
            self._metric = pyiqa.create_metric(metric, device=device)
        except Exception as exc:
            raise RuntimeError(f"cannot load IQA metric {metric!r}: {exc}") from exc
        self.model_id = f"pyiqa:{metric}"

    def score(self, image: Image.Image) -> float:
        import numpy as np
        import torch

        array = np.asarray(image.convert("RGB"), dtype="float32") / 255.0
        tensor = torch.from_numpy(array).permute(2, 0, 1).unsqueeze(0)
        return float(self._metric(tensor).item())


class OpenAiRelay:
    """OpenAI-compatible chat-completions relay for question generation.

    Spec form: openai:<base-url>|<model>. The key comes from OPENAI_API_KEY.
    """

    def __init__(self, base_url: str, model: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.model_id = f"openai:{model}"

    def generate(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get("OPENAI_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        response = requests.post(
            f"{self.base_url}/chat/completions",
            json={"model": self.model, "messages": [{"role": "user", "content": prompt}]},
            headers=headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]


def _split_spec(spec: str) -> tuple[str, str]:
    if ":" not in spec:
        raise RuntimeError(f"adapter spec {spec!r} must look like '<kind>:<argument>'")
    kind, _, argument = spec.partition(":")
    return kind, argument


def load_vqa(spec: str, device: str) -> VqaModel:
    kind, argument = _split_spec(spec)
    if kind == "constant":
        return ConstantVqa(argument)
    if kind == "hf-vqa":
        return HfVqa(argument, device)
    raise RuntimeError(f"unknown VQA adapter kind {kind!r}")


def load_iqa(spec: str, device: str) -> IqaModel:
    kind, argument = _split_spec(spec)
    if kind == "constant":
        try:
            return ConstantIqa(float(argument))
        except ValueError as exc:
            raise RuntimeError(f"constant IQA value must be a number: {spec!r}") from exc
    if kind == "pyiqa":
        return PyiqaModel(argument, device)
    raise RuntimeError(f"unknown IQA adapter kind {kind!r}")


def load_llm(spec: str) -> TextModel:
    kind, argument = _split_spec(spec)
    if kind == "constant":
        return ConstantText(argument)
    if kind == "openai":
        if "|" not in argument:
            raise RuntimeError("openai adapter spec is openai:<base-url>|<model>")
        base_url, _, model = argument.partition("|")
        return OpenAiRelay(base_url, model)
    raise RuntimeError(f"unknown LLM adapter kind {kind!r}")
