"""HTTP API serving the UI: chat, interventions, routine, stats, SSE events."""

from __future__ import annotations

import json
import os
import queue
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from .errors import (EngineError, GatewayTimeout, InvalidTransition, MockMiss,
                     UnknownId)
from .interventions import ACCEPTED, REJECTED
from .orchestrator import Engine
from .physio import classify_stress
from .routine import export_csv

SSE_KEEPALIVE_S = 15.0


class ChatRequest(BaseModel):
    conversation_id: str | None = None
    message: str


class DecisionRequest(BaseModel):
    decision: str


class RegisterRequest(BaseModel):
    kind: str
    name: str
    version: str = "1"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def create_app(engine: Engine, ui_dir: str | None = None,
               api_token: str | None = None) -> FastAPI:
    """Build the FastAPI app around a running engine.

    ``api_token`` (default: WORKPULSE_API_TOKEN from the environment) enables
    static bearer auth on everything except /healthz and the static UI.
    """
    app = FastAPI(title="workpulse", docs_url=None, redoc_url=None)
    token = api_token or os.environ.get("WORKPULSE_API_TOKEN")

    if token:
        @app.middleware("http")
        async def require_bearer(request: Request, call_next):
            open_paths = request.url.path == "/healthz" or request.url.path.startswith("/ui")
            if not open_paths:
                header = request.headers.get("authorization", "")
                if header != f"Bearer {token}":
                    return _error(401, "unauthorized", "missing or bad bearer token")
            return await call_next(request)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    # -- chat ---------------------------------------------------------------

    @app.post("/chat")
    def chat(body: ChatRequest):
        if not body.message.strip():
            return _error(422, "empty_message", "message must be non-empty")
        state = engine.conversations.get_or_create(body.conversation_id)
        try:
            reply, state = engine.conversations.respond(
                state, body.message, engine.routine.snapshot(),
                engine.current_stress(), engine.now_ms)
        except (GatewayTimeout, MockMiss) as exc:
            return _error(502, "model_unavailable", str(exc))
        return {"conversation_id": state.id, "reply": reply,
                "tone": state.effective_tone.token, "turn": state.turn_count}

    @app.get("/chat/{conversation_id}/history")
    def chat_history(conversation_id: str):
        state = engine.conversations.get(conversation_id)
        if state is None:
            return _error(404, "unknown_conversation", conversation_id)
        return state.to_json_obj()

    # -- interventions ------------------------------------------------------

    @app.get("/interventions")
    def interventions(status: str | None = None):
        return engine.interventions.list(status=status)

    @app.post("/interventions/{iv_id}/decision")
    def decide(iv_id: str, body: DecisionRequest):
        if body.decision not in (ACCEPTED, REJECTED):
            return _error(422, "bad_decision",
                          "decision must be 'accepted' or 'rejected'")
        try:
            iv = engine.interventions.decide(iv_id, body.decision, engine.now_ms)
        except UnknownId:
            return _error(404, "unknown_intervention", iv_id)
        except InvalidTransition as exc:
            return _error(409, "invalid_transition", str(exc))
        return iv.to_json_obj()

    # -- routine + stats -----------------------------------------------------

    @app.get("/routine")
    def routine(request: Request, format: str = "json"):
        table = engine.routine.snapshot()
        wants_csv = format == "csv" or "text/csv" in request.headers.get("accept", "")
        if wants_csv:
            return PlainTextResponse(export_csv(table), media_type="text/csv")
        rows = []
        for r in table.rows:
            stress = None if r.pnn50 is None else classify_stress(r.pnn50).value.lower()
            rows.append({**r.to_json_obj(), "stress": stress})
        return {
            "session_start": table.session_start.isoformat(),
            "row_minutes": table.row_minutes,
            "rows": rows,
        }

    @app.get("/stats/latency")
    def latency():
        return engine.gateway.latency.snapshot()

    # -- task agents -----------------------------------------------------------

    @app.get("/actions")
    def actions():
        return engine.agents.log_snapshot()

    @app.post("/agents/register", status_code=201)
    def register(body: RegisterRequest):
        engine.agents.register_external(body.kind, body.name, body.version)
        return {"registered": engine.agents.registry.describe()[body.kind],
                "kind": body.kind}

    # -- events ------------------------------------------------------------------

    @app.get("/events")
    def events():
        q = engine.bus.subscribe()

        def stream():
            yield ": connected\n\n"  # flush headers before the first real event
            try:
                while True:
                    try:
                        event_type, data = q.get(timeout=SSE_KEEPALIVE_S)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    payload = json.dumps(data, sort_keys=True)
                    yield f"event: {event_type}\ndata: {payload}\n\n"
            finally:
                engine.bus.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"cache-control": "no-cache"})

    @app.exception_handler(RequestValidationError)
    def validation_error_handler(_request, exc: RequestValidationError):
        return _error(422, "validation_error", str(exc.errors()))

    @app.exception_handler(EngineError)
    def engine_error_handler(_request, exc: EngineError):
        return _error(500, exc.__class__.__name__, str(exc))

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
