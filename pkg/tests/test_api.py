from __future__ import annotations

import json
import logging

import pytest
from fastapi.testclient import TestClient

from sheetlint.main import app
from sheetlint.middleware import _body_summary
from tests.support import RUNNING_EXAMPLE


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def example_body() -> bytes:
    return RUNNING_EXAMPLE.read_bytes()


def test_health(client):
    assert client.get("/").json() == {"status": "ok"}
    assert client.get("/api/v1/health").json() == {"status": "ok"}


def test_detectors(client):
    names = client.get("/api/v1/detectors").json()
    assert len(names) == 9
    assert "group-long-chain" in names


def test_analyze(client, example_body):
    resp = client.post("/api/v1/analyze", content=example_body, headers={"Content-Type": "application/json"})
    assert resp.status_code == 200
    data = resp.json()
    assert [s["name"] for s in data["sheets"]] == ["Department1", "Department2", "Department3", "Total", "Investment"]
    assert data["sheets"][4]["meta_headers"] == [["A2", "A3:A5"], ["A8", "A9:A11"]]
    assert data["source"] == ""


def test_smells(client, example_body):
    resp = client.post("/api/v1/smells", params={"detectors": "group-long-chain"}, content=example_body)
    assert resp.status_code == 200
    reports = resp.json()
    assert [r["subject"] for r in reports] == [
        "Investment!B3:B3",
        "Investment!B5:B5",
        "Investment!E9:E11",
        "Total!E4:E8",
    ]
    assert reports[2]["risk"] == "high"


def test_smells_unknown_detector(client, example_body):
    resp = client.post("/api/v1/smells", params={"detectors": "nope"}, content=example_body)
    assert resp.status_code == 422
    assert "unknown detector 'nope'" in resp.json()["detail"]


def test_invalid_document(client):
    body = {"sheets": [{"name": "S", "cells": [{"addr": "A1", "type": "empty"}]}]}
    resp = client.post("/api/v1/analyze", json=body)
    assert resp.status_code == 422
    assert isinstance(resp.json()["detail"], list)


def test_malformed_json(client):
    resp = client.post("/api/v1/analyze", content=b"{oops", headers={"Content-Type": "application/json"})
    assert resp.status_code == 422


def test_unparsable_formula(client):
    body = {"sheets": [{"name": "S", "cells": [{"addr": "B2", "type": "formula", "formula": "=SUM(A1"}]}]}
    resp = client.post("/api/v1/smells", json=body)
    assert resp.status_code == 422
    detail = resp.json()["detail"]
    assert (detail["sheet"], detail["addr"]) == ("S", "B2")
    assert "expected ')'" in detail["message"]


def test_requests_are_logged(client, example_body, caplog):
    caplog.set_level(logging.INFO, logger="uvicorn.error")
    resp = client.post("/api/v1/analyze", content=example_body)
    assert resp.headers["X-Analysis-Ms"].isdigit()
    messages = [r.getMessage() for r in caplog.records]
    assert any(m.startswith("analysis_request path=/api/v1/analyze status=200") for m in messages)


def test_health_is_not_timed(client):
    assert "X-Analysis-Ms" not in client.get("/api/v1/health").headers


def test_body_summary_never_includes_cells(example_body):
    summary = _body_summary(example_body)
    assert summary["sheets"] == {"Department1": 38, "Department2": 38, "Department3": 38, "Total": 32, "Investment": 29}
    assert "Coffee" not in json.dumps(summary)
    assert _body_summary(b"") is None
    assert _body_summary(b"{oops") == {"_bytes": 5}
    assert _body_summary(b"[1]") == {"_type": "list"}


def test_run_outcomes_are_served_from_the_run_log(client, tmp_path, monkeypatch):
    pytest.importorskip("aiosqlite")
    from sheetlint import api
    from sheetlint.services.evaluation import EvalConfig, evaluate_corpus
    from sheetlint.services.smells import SmellKind
    from tests.support import PATTERN_CORPUS

    url = f"sqlite+aiosqlite:///{(tmp_path / 'runs.db').as_posix()}"
    run_id = evaluate_corpus(
        EvalConfig(
            corpus=PATTERN_CORPUS,
            detectors=(SmellKind.OVERBURDENED_WORKSHEET,),
            output_dir=tmp_path / "out",
            workers=0,
            database_url=url,
        )
    ).run_id
    monkeypatch.setattr(api, "settings", api.settings.__class__(database_url=url))

    rows = client.get(f"/api/v1/runs/{run_id}/outcomes").json()
    assert [(r["file"], r["status"], r["error"]) for r in rows] == [
        ("a_grades.json", "completed", None),
        ("b_inventory.json", "completed", None),
        ("c_budget.json", "completed", None),
    ]
    assert all(r["records"] > 0 and r["seconds"] >= 0 for r in rows)

    missing = client.get(f"/api/v1/runs/{run_id + 1}/outcomes")
    assert missing.status_code == 404
    assert missing.json() == {"detail": f"Evaluation run {run_id + 1} not found"}
