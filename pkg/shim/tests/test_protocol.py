import base64

import pytest

from conftest import load_fixture
from model_server_shim.adapters import load_iqa, load_llm, load_vqa
from model_server_shim.app import create_app
from model_server_shim.config import ShimConfig


class TestGoldenFixtures:
    def test_vqa(self, client):
        response = client.post("/v1/vqa", json=load_fixture("vqa_request.json"))
        assert response.status_code == 200
        assert response.json() == load_fixture("vqa_response.json")
        assert response.headers["X-Backend-Id"] == "constant:yes"

    def test_iqa(self, client):
        response = client.post("/v1/iqa", json=load_fixture("iqa_request.json"))
        assert response.status_code == 200
        assert response.json() == load_fixture("iqa_response.json")

    def test_generate(self, client):
        response = client.post("/v1/generate", json=load_fixture("generate_request.json"))
        assert response.status_code == 200
        assert response.json() == load_fixture("generate_response.json")

    def test_response_schemas(self, client):
        vqa = client.post("/v1/vqa", json=load_fixture("vqa_request.json")).json()
        assert set(vqa) == {"answer"} and isinstance(vqa["answer"], str)
        iqa = client.post("/v1/iqa", json=load_fixture("iqa_request.json")).json()
        assert set(iqa) == {"score"}
        assert isinstance(iqa["score"], (int, float)) and 0.0 <= iqa["score"] <= 1.0
        gen = client.post("/v1/generate", json=load_fixture("generate_request.json")).json()
        assert set(gen) == {"text"} and isinstance(gen["text"], str)


class TestMalformedRequests:
    def test_not_json(self, client):
        response = client.post("/v1/vqa", content=b"this is not json",
                               headers={"Content-Type": "application/json"})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_non_object_body(self, client):
        response = client.post("/v1/vqa", json=["a", "list"])
        assert response.status_code == 400
        assert "error" in response.json()

    @pytest.mark.parametrize("route,body", [
        ("/v1/vqa", {"question": "no image?"}),
        ("/v1/vqa", {"image_png_b64": "aGk=", "question": 7}),
        ("/v1/iqa", {}),
        ("/v1/generate", {}),
        ("/v1/generate", {"prompt": ""}),
    ])
    def test_missing_fields(self, client, route, body):
        response = client.post(route, json=body)
        assert response.status_code == 400
        assert "error" in response.json()

    def test_invalid_base64(self, client):
        response = client.post("/v1/vqa", json={"image_png_b64": "!!!not-base64!!!",
                                                "question": "ok?"})
        assert response.status_code == 400
        assert "base64" in response.json()["error"]

    def test_undecodable_image(self, client):
        garbage = base64.b64encode(b"not a png at all").decode()
        response = client.post("/v1/iqa", json={"image_png_b64": garbage})
        assert response.status_code == 400
        assert "decode" in response.json()["error"]


class TestRoleHandling:
    def test_disabled_roles_404(self, vqa_only_client):
        for route, body in (("/v1/iqa", load_fixture("iqa_request.json")),
                            ("/v1/generate", {"prompt": "x"})):
            response = vqa_only_client.post(route, json=body)
            assert response.status_code == 404
            assert "not enabled" in response.json()["error"]

    def test_injected_adapters(self, injected_client):
        response = injected_client.post("/v1/vqa", json=load_fixture("vqa_request.json"))
        assert response.status_code == 200
        assert response.json()["answer"] == "yes"

    def test_inference_failure_is_500(self):
        class Exploding:
            model_id = "exploding"

            def score(self, image):
                raise RuntimeError("checkpoint went missing")

        from fastapi.testclient import TestClient

        app = create_app(ShimConfig(iqa_model="constant:0.1"), iqa=Exploding())
        client = TestClient(app)
        response = client.post("/v1/iqa", json=load_fixture("iqa_request.json"))
        assert response.status_code == 500
        assert "checkpoint went missing" in response.json()["error"]


class TestIqaMapping:
    @pytest.mark.parametrize("native,expected", [(0.5, 0.5), (1.7, 1.0), (-3.0, 0.0)])
    def test_native_scores_mapped_into_unit_interval(self, native, expected):
        from fastapi.testclient import TestClient

        app = create_app(ShimConfig(iqa_model=f"constant:{native}"))
        client = TestClient(app)
        response = client.post("/v1/iqa", json=load_fixture("iqa_request.json"))
        assert response.json()["score"] == expected


class TestConfig:
    def test_at_least_one_role(self):
        with pytest.raises(ValueError, match="at least one role"):
            ShimConfig()

    def test_max_concurrent_bound(self):
        with pytest.raises(ValueError, match="max_concurrent"):
            ShimConfig(vqa_model="constant:yes", max_concurrent=0)

    def test_from_file(self, tmp_path):
        path = tmp_path / "shim.json"
        path.write_text('{"vqa_model": "constant:yes", "port": 9001}')
        config = ShimConfig.from_file(path)
        assert config.port == 9001 and config.vqa_model == "constant:yes"

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "shim.json"
        path.write_text('{"vqa_model": "constant:yes", "wat": 1}')
        with pytest.raises(ValueError, match="unknown config keys"):
            ShimConfig.from_file(path)


class TestAdapterLoading:
    def test_constant_adapters(self):
        assert load_vqa("constant:yes", "cpu").answer(None, "q?") == "yes"
        assert load_iqa("constant:0.7", "cpu").score(None) == 0.7
        assert load_llm("constant:hello").generate("p") == "hello"

    def test_bad_specs_are_startup_errors(self):
        with pytest.raises(RuntimeError):
            load_vqa("nonsense:model", "cpu")
        with pytest.raises(RuntimeError):
            load_iqa("constant:not-a-number", "cpu")
        with pytest.raises(RuntimeError):
            load_llm("openai:missing-separator")

    def test_unloadable_checkpoint_is_startup_error(self):
        with pytest.raises(RuntimeError):
            create_app(ShimConfig(vqa_model="nonsense:model"))
