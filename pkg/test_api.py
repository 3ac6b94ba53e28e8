"""
HTTP service: check listing, single runs, suite uploads and report history.
"""
import asyncio
import json

import pytest
from fastapi.testclient import TestClient

from app import checks
from app.main import app


@pytest.fixture
def client(empty_history):
    with TestClient(app) as test_client:
        yield test_client


def test_root_lists_endpoints(client):
    response = client.get("/")
    assert response.status_code == 200
    data = response.json()
    assert "cauchy" in data["checks"]
    assert data["endpoints"]["run_check"] == "POST /api/checks/{name}"


def test_list_checks_includes_defaults(client):
    response = client.get("/api/checks")
    assert response.status_code == 200
    entries = {entry["name"]: entry for entry in response.json()}
    assert len(entries) == 13
    assert entries["cauchy"]["defaults"]["domain"] == "ball:0,0,0,0,1"


def test_run_check_with_overrides(client, empty_history):
    response = client.post("/api/checks/cauchy", json={"field": "const", "resolution": 8, "tolerance": 1e-6})
    assert response.status_code == 200
    report = response.json()
    assert report["check_name"] == "cauchy"
    assert report["pass"] is True
    assert report["node_counts"] == {"boundary": 8 * 8 * 16}
    assert len(empty_history.get_reports()) == 1


def test_run_check_without_a_body(client):
    response = client.post("/api/checks/kernel-identities")
    assert response.status_code == 200
    assert response.json()["pass"] is True


def test_failing_check_is_still_a_report(client):
    response = client.post("/api/checks/cauchy", json={"field": "identity", "resolution": 8})
    assert response.status_code == 200
    assert response.json()["pass"] is False


def test_unknown_check_is_404(client):
    assert client.post("/api/checks/stokes", json={}).status_code == 404


@pytest.mark.parametrize(
    "body",
    [
        {"domain": "sphere:1"},
        {"field": "sqrt"},
        {"point": [1.0, 2.0]},
        {"point": [2.0, 0.0, 0.0, 0.0], "resolution": 4},
    ],
)
def test_bad_requests_are_400(client, body):
    response = client.post("/api/checks/cauchy", json=body)
    assert response.status_code == 400
    assert response.json()["detail"]


def test_non_finite_values_are_500(client):
    response = client.post(
        "/api/checks/cauchy",
        json={"domain": "ball:0,0,0,0,1e300", "field": "power:2", "point": [0, 0, 0, 0], "resolution": 4},
    )
    assert response.status_code == 500
    assert "Numerical evaluation failed" in response.json()["detail"]


def test_reports_are_never_written_from_the_service(client, tmp_path):
    out = tmp_path / "report.json"
    response = client.post("/api/checks/kernel-identities", json={"samples": 10, "out": str(out)})
    assert response.status_code == 200
    assert not out.exists()


SUITE = [
    {"check": "kernel-identities", "samples": 20},
    {"check": "cauchy", "field": "const", "resolution": 8, "tolerance": 1e-6},
    {"check": "cauchy", "field": "identity", "resolution": 8},
]


def test_upload_suite(client, empty_history):
    files = {"file": ("suite.json", json.dumps(SUITE), "application/json")}
    response = client.post("/api/suite/upload", files=files, params={"workers": 2})
    assert response.status_code == 200
    summary = response.json()
    assert summary["total"] == 3
    assert summary["failures"] == 1
    assert summary["pass"] is False
    assert [entry["check_name"] for entry in summary["checks"]] == ["cauchy", "cauchy", "kernel-identities"]
    assert len(empty_history.get_reports()) == 3


def test_upload_runs_the_suite_off_the_event_loop(client, monkeypatch):
    seen = []
    run = checks.run_suite_configs

    def recording(configs, workers=1):
        try:
            asyncio.get_running_loop()
            seen.append("event loop")
        except RuntimeError:
            seen.append("worker thread")
        return run(configs, workers)

    monkeypatch.setattr(checks, "run_suite_configs", recording)
    files = {"file": ("suite.json", json.dumps(SUITE[:1]), "application/json")}
    assert client.post("/api/suite/upload", files=files).status_code == 200
    assert seen == ["worker thread"]


def test_upload_rejects_other_file_types(client):
    files = {"file": ("suite.txt", json.dumps(SUITE), "text/plain")}
    response = client.post("/api/suite/upload", files=files)
    assert response.status_code == 400
    assert "Only .json" in response.json()["detail"]


def test_upload_rejects_malformed_suites(client):
    files = {"file": ("suite.json", "[{", "application/json")}
    assert client.post("/api/suite/upload", files=files).status_code == 400
    files = {"file": ("suite.json", b"\xff\xfe\x00", "application/json")}
    assert client.post("/api/suite/upload", files=files).status_code == 400


def test_report_history_filter(client):
    client.post("/api/checks/kernel-identities", json={"samples": 10})
    client.post("/api/checks/cauchy", json={"field": "const", "resolution": 8})
    all_reports = client.get("/api/reports").json()
    assert [r["check_name"] for r in all_reports] == ["kernel-identities", "cauchy"]
    only_cauchy = client.get("/api/reports", params={"check": "cauchy"}).json()
    assert len(only_cauchy) == 1
    assert only_cauchy[0]["check_name"] == "cauchy"
