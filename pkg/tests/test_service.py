"""HTTP API: endpoints, typed errors, SSE delivery."""

import json
import threading

import pytest
from fastapi.testclient import TestClient

from workpulse.orchestrator import Engine, EngineConfig
from workpulse.perception import Criticality
from workpulse.service import create_app
from workpulse.tracegen import day_mock_rules

from test_interventions import ctx


@pytest.fixture
def engine(tmp_path):
    rules = day_mock_rules() + [
        {"matcher": "unused-filler", "response": "x", "priority": 999},
    ]
    rules_path = tmp_path / "rules.json"
    rules_path.write_text(json.dumps(rules))
    config = EngineConfig(mock_rules=str(rules_path),
                          store_dir=str(tmp_path / "store"),
                          outbox_dir=str(tmp_path / "outbox"),
                          summary_path=str(tmp_path / "summary.json"))
    return Engine(config)


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


def deliver_one(engine):
    iv = engine.interventions.on_interval(ctx(), Criticality.LOW, 0.0)
    return iv


def test_healthz(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_chat_round_trip_and_history(client):
    resp = client.post("/chat", json={"message": "explain binary cross-entropy"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["reply"]
    assert body["turn"] == 1
    assert body["tone"] in ("neutral_subtle", "moderately_motivational",
                            "highly_motivational")
    cid = body["conversation_id"]
    hist = client.get(f"/chat/{cid}/history").json()
    assert [m["role"] for m in hist["messages"]] == ["user", "assistant"]

    second = client.post("/chat", json={"conversation_id": cid, "message": "more"})
    assert second.json()["turn"] == 2


def test_chat_empty_message_rejected(client):
    resp = client.post("/chat", json={"message": "   "})
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "empty_message"


def test_chat_unknown_history_404(client):
    resp = client.get("/chat/nope/history")
    assert resp.status_code == 404


def test_chat_model_unavailable_returns_typed_502(engine, tmp_path):
    rules_path = tmp_path / "norules.json"
    rules_path.write_text("[]")
    config = EngineConfig(mock_rules=str(rules_path),
                          store_dir=str(tmp_path / "s2"),
                          outbox_dir=str(tmp_path / "o2"),
                          summary_path=str(tmp_path / "sum2.json"))
    bare = Engine(config)
    client = TestClient(create_app(bare))
    resp = client.post("/chat", json={"message": "hello"})
    assert resp.status_code == 502
    assert resp.json()["error"]["code"] == "model_unavailable"
    # nothing was recorded for the failed turn
    assert bare.conversations.get_or_create(
        resp.request.headers.get("x-none", None)).messages == []


def test_decision_unknown_id_404(client):
    resp = client.post("/interventions/iv-9999/decision",
                       json={"decision": "accepted"})
    assert resp.status_code == 404
    assert resp.json()["error"]["code"] == "unknown_intervention"


def test_decision_flow_and_conflict(engine, client):
    iv = deliver_one(engine)
    listed = client.get("/interventions", params={"status": "delivered"}).json()
    assert [item["id"] for item in listed] == [iv.id]

    ok = client.post(f"/interventions/{iv.id}/decision", json={"decision": "accepted"})
    assert ok.status_code == 200
    assert ok.json()["status"] == "accepted"

    again = client.post(f"/interventions/{iv.id}/decision", json={"decision": "rejected"})
    assert again.status_code == 409

    bad = client.post(f"/interventions/{iv.id}/decision", json={"decision": "maybe"})
    assert bad.status_code == 422


def test_routine_json_and_csv(engine, client):
    from test_routine import example_table
    engine.routine.rows = list(example_table().rows)
    as_json = client.get("/routine").json()
    assert len(as_json["rows"]) == 5
    as_csv = client.get("/routine", params={"format": "csv"})
    assert as_csv.headers["content-type"].startswith("text/csv")
    assert as_csv.text.splitlines()[0].startswith("Time Interval,Desk Work (min)")


def test_latency_stats_endpoint(engine, client):
    from workpulse.gateway import COMPLETION, MOCK, ModelResponse
    for latency in (2.0, 4.0):
        engine.gateway.record_latency(ModelResponse("x", latency, MOCK,
                                                    COMPLETION, "m"))
    stats = client.get("/stats/latency").json()
    assert stats[0]["mean_s"] == pytest.approx(3.0)
    assert stats[0]["count"] == 2


def test_actions_and_register(client):
    resp = client.post("/agents/register",
                       json={"kind": "other", "name": "my-agent", "version": "2"})
    assert resp.status_code == 201
    assert resp.json()["registered"]["name"] == "my-agent"
    assert client.get("/actions").json() == []


def test_validation_errors_use_typed_body(client):
    resp = client.post("/chat", json={"not_message": 1})
    assert resp.status_code == 422
    assert resp.json()["error"]["code"] == "validation_error"


def test_static_bearer_token_guard(engine):
    client = TestClient(create_app(engine, api_token="sekrit"))
    assert client.get("/healthz").status_code == 200  # liveness stays open
    assert client.get("/interventions").status_code == 401
    assert client.get("/interventions").json()["error"]["code"] == "unauthorized"
    ok = client.get("/interventions", headers={"authorization": "Bearer sekrit"})
    assert ok.status_code == 200


def test_sse_delivers_exactly_one_intervention_event(engine):
    # the sync TestClient buffers streaming bodies, so run a real server
    import socket
    import time

    import httpx
    import uvicorn

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(create_app(engine), host="127.0.0.1",
                                           port=port, log_level="error"))
    server_thread = threading.Thread(target=server.run, daemon=True)
    server_thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        assert time.monotonic() < deadline, "server failed to start"
        time.sleep(0.01)

    received = []
    connected = threading.Event()

    def listen():
        with httpx.stream("GET", f"http://127.0.0.1:{port}/events",
                          timeout=10.0) as resp:
            event_type = None
            for line in resp.iter_lines():
                if line.startswith(": connected"):
                    connected.set()
                elif line.startswith("event: "):
                    event_type = line.split("event: ")[1]
                elif line.startswith("data: ") and event_type == "intervention":
                    received.append(json.loads(line.split("data: ", 1)[1]))
                    return

    listener = threading.Thread(target=listen, daemon=True)
    listener.start()
    try:
        assert connected.wait(5.0)
        iv = deliver_one(engine)
        listener.join(timeout=5.0)
        assert not listener.is_alive()
        assert len(received) == 1
        assert received[0]["id"] == iv.id
    finally:
        server.should_exit = True
        server_thread.join(timeout=5.0)
