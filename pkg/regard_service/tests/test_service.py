"""Conformance suite for the /v1/regard + /healthz wire contract."""
import threading
import time

import pytest
import requests
import uvicorn
from fastapi.testclient import TestClient

from regard_service import create_app

TEXTS = [
    "they were a respected business figure",
    "the person faced discrimination and challenges",
    "a renowned success praised by the community",
    "plain words about ordinary work",
]


@pytest.fixture(scope="module")
def client(model_dir):
    with TestClient(create_app(model_dir)) as client:
        yield client


class TestScoreBatch:
    def test_valid_batch_is_order_aligned_and_normalized(self, client):
        resp = client.post("/v1/regard", json={"texts": TEXTS})
        assert resp.status_code == 200
        results = resp.json()["results"]
        assert len(results) == len(TEXTS)
        for row in results:
            assert set(row) == {"negative", "neutral", "positive", "other"}
            assert abs(sum(row.values()) - 1.0) <= 1e-6
            assert all(v >= 0 for v in row.values())

    def test_empty_list_rejected_400(self, client):
        assert client.post("/v1/regard", json={"texts": []}).status_code == 400

    def test_65_texts_rejected_400(self, client):
        resp = client.post("/v1/regard", json={"texts": ["x"] * 65})
        assert resp.status_code == 400

    def test_64_texts_accepted(self, client):
        resp = client.post("/v1/regard", json={"texts": ["x"] * 64})
        assert resp.status_code == 200
        assert len(resp.json()["results"]) == 64

    def test_malformed_body_rejected_400(self, client):
        assert client.post("/v1/regard", json={"text": "wrong field"}).status_code == 400
        assert client.post("/v1/regard", json={"texts": [1, 2]}).status_code == 400

    def test_permuting_texts_permutes_results_identically(self, client):
        base = client.post("/v1/regard", json={"texts": TEXTS}).json()["results"]
        perm = [2, 0, 3, 1]
        permuted = client.post(
            "/v1/regard", json={"texts": [TEXTS[i] for i in perm]}).json()["results"]
        for out_pos, src_pos in enumerate(perm):
            assert permuted[out_pos] == base[src_pos]

    def test_same_text_scores_identically(self, client):
        a = client.post("/v1/regard", json={"texts": [TEXTS[0]]}).json()["results"][0]
        b = client.post("/v1/regard", json={"texts": [TEXTS[0]]}).json()["results"][0]
        assert a == b

    def test_missing_other_class_reported_as_zero(self, no_other_model_dir):
        with TestClient(create_app(no_other_model_dir)) as client:
            resp = client.post("/v1/regard", json={"texts": ["anything at all"]})
            row = resp.json()["results"][0]
            assert row["other"] == 0.0
            assert abs(sum(row.values()) - 1.0) <= 1e-6


class TestHealthz:
    def test_503_before_model_loads(self, model_dir):
        app = create_app(model_dir)  # lifespan not entered: model not loaded
        client = TestClient(app)
        assert client.get("/healthz").status_code == 503
        assert client.post("/v1/regard", json={"texts": ["x"]}).status_code == 503

    def test_200_ok_after_load_and_idempotent(self, client):
        for _ in range(3):
            resp = client.get("/healthz")
            assert resp.status_code == 200
            assert resp.text == "ok"


class TestOverRealSocket:
    def test_contract_via_uvicorn(self, model_dir):
        server = uvicorn.Server(uvicorn.Config(
            create_app(model_dir), host="127.0.0.1", port=0, log_level="error"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.monotonic() + 30
            while not server.started:
                assert time.monotonic() < deadline, "server did not start"
                time.sleep(0.05)
            port = server.servers[0].sockets[0].getsockname()[1]
            base = f"http://127.0.0.1:{port}"
            assert requests.get(f"{base}/healthz", timeout=10).text == "ok"
            resp = requests.post(f"{base}/v1/regard",
                                 json={"texts": TEXTS[:2]}, timeout=30)
            assert resp.status_code == 200
            assert len(resp.json()["results"]) == 2
        finally:
            server.should_exit = True
            thread.join(timeout=10)
