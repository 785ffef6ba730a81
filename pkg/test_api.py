import threading
from unittest.mock import patch

import pytest
from fastapi.testclient import TestClient

from app.core.config import VERSION, settings
from app.main import app
from app.services import analytic
from app.models.params import SystemParams


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path))
    return TestClient(app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "active"
    assert body["version"] == VERSION
    assert body["config"]["seed"] == settings.SEED


def test_coverage_endpoint(client):
    response = client.get("/coverage", params={"distance": 150.0})
    assert response.status_code == 200
    body = response.json()
    assert body["coverage"] == pytest.approx(analytic.coverage_probability(150.0, SystemParams.baseline()))
    assert body["assisted_coverage"] >= max(body["coverage"], body["bs_coverage"])
    assert "bounds" not in body


def test_coverage_endpoint_bounds(client):
    body = client.get("/coverage", params={"distance": 100.0, "tau_m": 3}).json()
    assert body["bounds"]["lower"] <= body["coverage"] <= body["bounds"]["upper"]


def test_coverage_endpoint_validates(client):
    assert client.get("/coverage", params={"distance": -5.0}).status_code == 422
    assert client.get("/coverage", params={"distance": 50.0, "tau_m": 0}).status_code == 422


def test_reproduce_unknown_figure(client):
    assert client.post("/reproduce/fig1").status_code == 404


def test_reproduce_triggers_background_job(client, tmp_path):
    with patch("app.main.run_reproduction_jobs", return_value={}) as mock_jobs:
        response = client.post("/reproduce/fig3")
    assert response.status_code == 200
    assert response.json()["csv"] == f"{tmp_path}/fig3.csv"
    mock_jobs.assert_called_once_with(["fig3"])


def test_health_answers_while_figure_runs(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path))
    started, release, finished = threading.Event(), threading.Event(), threading.Event()

    def slow_reproduce(figure, config=None):
        started.set()
        release.wait(5)
        finished.set()
        return {"path": str(tmp_path / f"{figure}.csv")}

    with patch("app.core.workflow.cmd_reproduce", side_effect=slow_reproduce), TestClient(app) as client:
        request = threading.Thread(target=client.post, args=("/reproduce/fig6",))
        request.start()
        assert started.wait(5)
        health = client.get("/health")
        assert not finished.is_set()
        release.set()
        request.join(10)

    assert health.status_code == 200
    assert finished.is_set()


def test_results_listing(client, tmp_path):
    assert client.get("/results").json()["files"] == []
    (tmp_path / "fig2.csv").write_text("# version: x\n", encoding="utf-8")
    assert client.get("/results").json()["files"] == ["fig2.csv"]
