"""Endpoint behavior through the ASGI test client (no sockets)."""
import pytest
from fastapi.testclient import TestClient

from nli_service import ModelHolder, ModelLoadError, ServiceConfig, create_app

from conftest import FIGURE_HYPOTHESIS, FIGURE_PREMISE, service_config


@pytest.fixture(scope="module")
def ready_client(tiny_checkpoint):
    config = service_config(tiny_checkpoint)
    holder = ModelHolder()
    holder.load(config)
    return TestClient(create_app(config, holder))


def test_health_and_nli_gate_on_model_load(tiny_checkpoint):
    config = service_config(tiny_checkpoint)
    holder = ModelHolder()
    client = TestClient(create_app(config, holder))

    response = client.get("/health")
    assert response.status_code == 503
    assert response.json() == {"error": "model not loaded"}
    response = client.post("/nli", json={"pairs": [{"premise": "a", "hypothesis": "b"}]})
    assert response.status_code == 503
    assert "error" in response.json()

    holder.load(config)
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "model": tiny_checkpoint}


def test_failed_load_is_reported_by_health(tmp_path):
    config = ServiceConfig(model_id=str(tmp_path / "missing"), sanity_check=False)
    holder = ModelHolder()
    client = TestClient(create_app(config, holder))
    with pytest.raises(ModelLoadError):
        holder.load(config)
    response = client.get("/health")
    assert response.status_code == 503
    assert response.json()["error"].startswith("model failed to load:")


def test_single_pair_response_shape(ready_client):
    response = ready_client.post(
        "/nli", json={"pairs": [{"premise": "the pub", "hypothesis": "the pub"}]}
    )
    assert response.status_code == 200
    results = response.json()["results"]
    assert len(results) == 1
    distribution = results[0]
    total = sum(distribution[name] for name in ("contradiction", "neutral", "entailment"))
    assert abs(total - 1.0) <= 1e-4
    assert distribution["truncated"] is False


def test_results_align_with_request_order(ready_client):
    pairs = [
        {"premise": f"the {a} is in the {b}", "hypothesis": f"a {a} is running"}
        for a, b in [("dog", "park"), ("cat", "house"), ("bird", "riverside")]
    ]
    batched = ready_client.post("/nli", json={"pairs": pairs}).json()["results"]
    assert len(batched) == 3
    for pair, from_batch in zip(pairs, batched):
        alone = ready_client.post("/nli", json={"pairs": [pair]}).json()["results"][0]
        for name in ("contradiction", "neutral", "entailment"):
            assert abs(from_batch[name] - alone[name]) <= 1e-6


@pytest.mark.parametrize(
    "body",
    [
        "this is not json",
        "{}",
        '{"pairs": []}',
        '{"pairs": "premise and hypothesis"}',
        '{"pairs": [{"premise": "only half"}]}',
        '{"pairs": [{"premise": 3, "hypothesis": "b"}]}',
    ],
)
def test_malformed_requests_get_400_with_error_body(ready_client, body):
    response = ready_client.post(
        "/nli", content=body, headers={"content-type": "application/json"}
    )
    assert response.status_code == 400
    payload = response.json()
    assert isinstance(payload["error"], str) and payload["error"]


def test_blank_strings_get_400(ready_client):
    response = ready_client.post(
        "/nli", json={"pairs": [{"premise": "  ", "hypothesis": "b"}]}
    )
    assert response.status_code == 400
    assert "pairs.0" in response.json()["error"]


def test_pinned_pair_reproduces_frozen_distribution(
    ready_client, pinned_figure_distribution
):
    response = ready_client.post(
        "/nli",
        json={"pairs": [{"premise": FIGURE_PREMISE, "hypothesis": FIGURE_HYPOTHESIS}]},
    )
    assert response.status_code == 200
    result = response.json()["results"][0]
    for name, expected in pinned_figure_distribution.items():
        assert abs(result[name] - expected) <= 1e-4
    assert result["truncated"] is False
