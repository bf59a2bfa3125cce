"""Shared test utilities: synthetic photos, scripted backends, dataset builders."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from t2i_eval.core import IqaScore
from t2i_eval.backends.base import VqaResponse
from t2i_eval.degrade import save_png


def make_photo(seed: int, size: int = 96) -> np.ndarray:
    """A deterministic photo-like RGB image: gradients, blobs, light texture."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = np.zeros((size, size, 3))
    for c in range(3):
        fx, fy = rng.uniform(0.5, 2.0, 2)
        phase = rng.uniform(0, 2 * np.pi)
        img[..., c] = 120 + 90 * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    for _ in range(6):
        cy, cx = rng.uniform(0.15, 0.85, 2) * size
        radius = rng.uniform(0.06, 0.2) * size
        color = rng.uniform(30, 225, 3)
        mask = (yy * size - cy) ** 2 + (xx * size - cx) ** 2 < radius**2
        img[mask] = color
    img += rng.normal(0, 5, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_photo(path: Path, seed: int, size: int = 96) -> Path:
    save_png(make_photo(seed, size), path)
    return path


class ScriptedLlm:
    """Replays canned responses; records every prompt it was sent."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.prompts: list[str] = []

    def generate(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if len(self.responses) > 1:
            return self.responses.pop(0)
        return self.responses[0]


class FailingVqa:
    """Raises for selected image ids, answers yes otherwise."""

    def __init__(self, failing_image_ids: set[str]):
        self.failing = failing_image_ids
        self.backend_id = "mock:failing"
        self.calls = 0

    def ask(self, image, question) -> VqaResponse:
        self.calls += 1
        if image.image_id in self.failing:
            raise RuntimeError(f"backend down for {image.image_id}")
        return VqaResponse.from_raw("yes", 0.0, self.backend_id)


class FailingIqa:
    def __init__(self, failing_image_ids: set[str]):
        self.failing = failing_image_ids
        self.backend_id = "mock:failing-iqa"
        self.calls = 0

    def score(self, image) -> IqaScore:
        self.calls += 1
        if image.image_id in self.failing:
            raise RuntimeError(f"iqa down for {image.image_id}")
        return IqaScore(1.0, 1.0, self.backend_id)


def write_dataset(path: Path, rows: list[dict]) -> Path:
    path.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")
    return path
