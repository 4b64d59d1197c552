from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from lemmaflow.pipeline import AWAITING_DECISION, FINISHED
from lemmaflow.server import build_app

import pipeline_fixtures as fx


def wait_until(predicate, timeout=10.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval)
    raise AssertionError("condition not reached in time")


def read_stream(client, session_id, since=0, follow=True, stop=None, max_events=500):
    """Consume the SSE stream until `stop(events)` is true (or it closes).

    The in-process test client buffers response bodies, so use
    follow=False for sessions that have not finished (their live stream
    never closes).
    """
    events = []
    url = f"/api/sessions/{session_id}/events?since={since}&follow={'true' if follow else 'false'}"
    with client.stream("GET", url) as resp:
        assert resp.status_code == 200
        for line in resp.iter_lines():
            if not line.startswith("data: "):
                continue
            events.append(json.loads(line[len("data: "):]))
            if stop is not None and stop(events):
                break
            if len(events) >= max_events:
                break
    return events


@pytest.fixture()
def client(tmp_path):
    app = build_app(fx.two_lemma_config(), tmp_path / "data")
    with TestClient(app) as c:
        yield c


def create_problem(client, problem=None):
    problem = problem or fx.TWO_LEMMA_PROBLEM
    resp = client.post("/api/problems", json=problem.to_dict())
    assert resp.status_code == 201
    return resp.json()["id"]


def create_session(client, problem_id, mode="auto", options=None):
    resp = client.post(
        "/api/sessions", json={"problem_id": problem_id, "mode": mode, "options": options or {}}
    )
    assert resp.status_code == 201, resp.text
    return resp.json()


def finished_summary(client, session_id):
    return wait_until(
        lambda: (
            lambda s: s if s["state"] == FINISHED else None
        )(client.get(f"/api/sessions/{session_id}").json())
    )


# ---------------------------------------------------------------------------


def test_automatic_session_reaches_verified(client):
    pid = create_problem(client)
    summary = create_session(client, pid)
    assert summary["mode"] == "automatic"
    final = finished_summary(client, summary["session_id"])
    assert final["verdict"]["kind"] == "Verified"


def test_unknown_problem_404(client):
    resp = client.post("/api/sessions", json={"problem_id": "ghost", "mode": "auto"})
    assert resp.status_code == 404
    assert resp.json()["code"] == "unknown_problem"


def test_unknown_session_404(client):
    assert client.get("/api/sessions/nope").status_code == 404
    assert client.get("/api/reports/nope").status_code == 404


def test_event_stream_is_gapless_and_replayable(client):
    pid = create_problem(client)
    summary = create_session(client, pid)
    sid = summary["session_id"]
    finished_summary(client, sid)

    events = read_stream(client, sid)
    seqs = [e["seq"] for e in events]
    assert seqs == list(range(1, len(seqs) + 1))
    assert events[-1]["kind"] == "VerdictReached"

    # resumable cursor: replay strictly after the cursor, no duplicates
    cursor = seqs[len(seqs) // 2]
    tail = read_stream(client, sid, since=cursor)
    assert [e["seq"] for e in tail] == [s for s in seqs if s > cursor]


def test_report_endpoints(client):
    pid = create_problem(client)
    sid = create_session(client, pid)["session_id"]
    finished_summary(client, sid)
    wait_until(lambda: client.get(f"/api/reports/{sid}").status_code == 200)
    report = client.get(f"/api/reports/{sid}").json()
    assert report["verdict"]["kind"] == "Verified"
    assert report["schema_version"] == 1
    rendered = client.get(f"/api/reports/{sid}/rendered")
    assert rendered.status_code == 200
    assert "VERIFICATION REPORT" in rendered.text


def test_decision_on_finished_session_is_409(client):
    pid = create_problem(client)
    sid = create_session(client, pid)["session_id"]
    finished_summary(client, sid)
    resp = client.post(f"/api/sessions/{sid}/decision", json={"type": "StopNegative"})
    assert resp.status_code == 409
    assert resp.json()["code"] == "conflict"


def test_interactive_decision_flow(tmp_path):
    app = build_app(fx.failing_fact_proof_config(), tmp_path / "data")
    with TestClient(app) as client:
        pid = create_problem(client)
        sid = create_session(client, pid, mode="interactive")["session_id"]
        summary = wait_until(
            lambda: (
                lambda s: s if s["state"] == AWAITING_DECISION else None
            )(client.get(f"/api/sessions/{sid}").json())
        )
        assert summary["verdict"] is None

        # the decision context is the last DecisionRequested event
        events = read_stream(
            client, sid, follow=False, stop=lambda evs: evs[-1]["kind"] == "DecisionRequested"
        )
        requested = events[-1]
        assert requested["kind"] == "DecisionRequested"
        legal = requested["data"]["context"]["legal"]
        assert len(legal) == 5

        # illegal decision -> 422, state unchanged
        resp = client.post(
            f"/api/sessions/{sid}/decision",
            json={"type": "ProvideFormalization", "code": "x", "expected_seq": requested["seq"]},
        )
        assert resp.status_code == 422
        assert client.get(f"/api/sessions/{sid}").json()["state"] == AWAITING_DECISION

        # stale expected_seq -> 409
        resp = client.post(
            f"/api/sessions/{sid}/decision",
            json={"type": "RetryProver", "expected_seq": requested["seq"] - 1},
        )
        assert resp.status_code == 409

        # legal decision with the right seq -> applied, session resumes
        resp = client.post(
            f"/api/sessions/{sid}/decision",
            json={"type": "RetryProver", "expected_seq": requested["seq"]},
        )
        assert resp.status_code == 200
        assert resp.json()["kind"] == "DecisionApplied"
        final = wait_until(
            lambda: (
                lambda s: s if s["state"] == FINISHED else None
            )(client.get(f"/api/sessions/{sid}").json())
        )
        assert final["verdict"]["kind"] == "Verified"


def test_restart_preserves_reports_and_awaiting_sessions(tmp_path):
    data = tmp_path / "data"
    cfg = fx.failing_fact_proof_config()
    app1 = build_app(cfg, data)
    with TestClient(app1) as client:
        pid = create_problem(client)
        done_sid = create_session(client, pid)["session_id"]  # automatic -> Refuted
        finished_summary(client, done_sid)
        wait_until(lambda: client.get(f"/api/reports/{done_sid}").status_code == 200)

        wait_sid = create_session(client, pid, mode="interactive")["session_id"]
        wait_until(
            lambda: client.get(f"/api/sessions/{wait_sid}").json()["state"] == AWAITING_DECISION
        )
        stop = lambda evs: evs[-1]["kind"] == "DecisionRequested"
        events_before = read_stream(client, wait_sid, follow=False, stop=stop)

    # simulate a crash-restart: a brand new app over the same data dir
    app2 = build_app(cfg, data)
    with TestClient(app2) as client:
        report = client.get(f"/api/reports/{done_sid}")
        assert report.status_code == 200

        summary = client.get(f"/api/sessions/{wait_sid}").json()
        assert summary["state"] == AWAITING_DECISION
        events_after = read_stream(client, wait_sid, follow=False, stop=stop)
        assert events_after == events_before

        # and the resumed session still accepts its decision
        requested = events_after[-1]
        resp = client.post(
            f"/api/sessions/{wait_sid}/decision",
            json={"type": "RetryProver", "expected_seq": requested["seq"]},
        )
        assert resp.status_code == 200


def test_sessions_listing(client):
    pid = create_problem(client)
    first = create_session(client, pid)["session_id"]
    second = create_session(client, pid)["session_id"]
    listing = client.get("/api/sessions").json()
    assert {s["session_id"] for s in listing} >= {first, second}


def test_batch_endpoint_runs_and_scores(client):
    records = [fx.TWO_LEMMA_PROBLEM.to_dict() | {"label": True}]
    resp = client.post("/api/batch", json={"records": records, "n_runs": 2})
    assert resp.status_code == 202
    batch_id = resp.json()["batch_id"]
    status = wait_until(
        lambda: (
            lambda s: s if s["status"] == "done" else None
        )(client.get(f"/api/batch/{batch_id}").json())
    )
    assert status["total"] == 2 and status["completed"] == 2
    assert status["metrics"]["tp"] == 2
    assert status["verdicts"] == {"p-two-lemma": ["Verified", "Verified"]}


def test_batch_invalid_payload_422(client):
    assert client.post("/api/batch", json={}).status_code == 422


def test_batch_unknown_404(client):
    assert client.get("/api/batch/ghost").status_code == 404
