from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from model_server_shim.adapters import ConstantIqa, ConstantText, ConstantVqa
from model_server_shim.app import create_app
from model_server_shim.config import ShimConfig

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str) -> dict:
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))


@pytest.fixture()
def client() -> TestClient:
    config = ShimConfig(vqa_model="constant:yes", iqa_model="constant:0.5",
                        llm_model="constant:Is there a red bird?", max_concurrent=2)
    app = create_app(config)
    return TestClient(app)


@pytest.fixture()
def vqa_only_client() -> TestClient:
    config = ShimConfig(vqa_model="constant:yes")
    return TestClient(create_app(config))


@pytest.fixture()
def injected_client() -> TestClient:
    """Adapters injected directly, bypassing spec-string loading."""
    config = ShimConfig(vqa_model="constant:unused")
    app = create_app(
        config,
        vqa=ConstantVqa("yes"),
        iqa=ConstantIqa(0.5),
        llm=ConstantText("Is there a red bird?"),
    )
    return TestClient(app)
