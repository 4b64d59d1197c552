"""HTTP service: session lifecycle, live event streaming, reports, batches.

Events stream as server-sent events; the ``since`` cursor (or the
standard ``Last-Event-Id`` header) replays from any sequence number, so
a client reconnect never gaps or duplicates.  No authentication: bind
to localhost unless you know what you are doing.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path
from typing import Iterator

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..pipeline import (
    Decision,
    IllegalDecision,
    MODE_AUTOMATIC,
    MODE_INTERACTIVE,
    PipelineConfig,
    UnknownSession,
)
from ..solution import ProblemStatement
from .store import (
    NotAwaitingDecision,
    SessionStore,
    StaleSequence,
    UnknownBatch,
    UnknownProblem,
)

_MODE_ALIASES = {"auto": MODE_AUTOMATIC, "automatic": MODE_AUTOMATIC, "interactive": MODE_INTERACTIVE}


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def build_app(
    cfg: PipelineConfig,
    data_dir: str | Path,
    ui_dir: str | Path | None = None,
    clock=time.time,
    resume: bool = True,
) -> FastAPI:
    store = SessionStore(data_dir, cfg, clock=clock)
    app = FastAPI(title="solution verification server")
    app.state.store = store
    if resume:
        store.resume_unfinished()

    # -- problems -------------------------------------------------------

    @app.get("/api/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/api/problems", status_code=201)
    async def create_problem(request: Request):
        body = await request.json()
        try:
            problem = ProblemStatement.from_dict(body)
        except (KeyError, ValueError) as exc:
            return _error(422, "invalid_problem", str(exc))
        return {"id": store.save_problem(problem)}

    # -- sessions ---------------------------------------------------------

    @app.post("/api/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        mode = _MODE_ALIASES.get(str(body.get("mode", "auto")).lower())
        if mode is None:
            return _error(422, "invalid_mode", f"unknown mode {body.get('mode')!r}")
        options = body.get("options") or {}
        try:
            session = store.create_session(
                body.get("problem_id", ""),
                mode,
                introduce_variables=options.get("introduce_variables"),
            )
        except UnknownProblem as exc:
            return _error(404, "unknown_problem", str(exc))
        store.drive_in_background(session.session_id)
        return store.summary(session.session_id)

    @app.get("/api/sessions")
    def list_sessions():
        return [store.summary(sid) for sid in store.known_session_ids()]

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return store.summary(session_id)
        except UnknownSession:
            return _error(404, "unknown_session", session_id)

    @app.get("/api/sessions/{session_id}/events")
    def stream_events(session_id: str, request: Request, since: int = 0, follow: bool = True):
        """Server-sent event stream, replayable from any cursor.

        follow=true (default) keeps the stream open for live events and
        closes once the session finishes; follow=false closes after
        emitting everything currently available (snapshot read).
        """
        last_event_id = request.headers.get("last-event-id")
        if last_event_id is not None:
            try:
                since = max(since, int(last_event_id))
            except ValueError:
                pass
        try:
            store.get_session(session_id)
        except UnknownSession:
            return _error(404, "unknown_session", session_id)

        def generate() -> Iterator[str]:
            cursor = since
            idle_rounds = 0
            while True:
                events = store.wait_for_events(session_id, cursor, timeout=0.25)
                for event in events:
                    cursor = event.seq
                    yield f"id: {event.seq}\ndata: {event.to_json()}\n\n"
                session = store.get_session(session_id)
                if session.finished and cursor >= session.log.last_seq:
                    return
                if not follow and cursor >= session.log.last_seq:
                    return
                if not events:
                    idle_rounds += 1
                    if idle_rounds % 20 == 0:
                        yield ": ping\n\n"

        return StreamingResponse(
            generate(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.post("/api/sessions/{session_id}/decision")
    async def post_decision(session_id: str, request: Request):
        body = await request.json()
        decision = Decision.from_dict(body)
        try:
            event = store.apply_decision(session_id, decision)
        except UnknownSession:
            return _error(404, "unknown_session", session_id)
        except (NotAwaitingDecision, StaleSequence) as exc:
            return _error(409, "conflict", str(exc))
        except IllegalDecision as exc:
            return _error(422, "illegal_decision", str(exc))
        return event.to_dict()

    # -- reports ----------------------------------------------------------

    @app.get("/api/reports/{session_id}")
    def get_report(session_id: str):
        try:
            return json.loads(store.load_report(session_id).canonical_json())
        except UnknownSession:
            return _error(404, "unknown_report", session_id)

    @app.get("/api/reports/{session_id}/rendered")
    def get_report_rendered(session_id: str):
        try:
            return PlainTextResponse(store.render_report(session_id))
        except UnknownSession:
            return _error(404, "unknown_report", session_id)

    # -- batches ----------------------------------------------------------

    @app.post("/api/batch", status_code=202)
    async def submit_batch(request: Request):
        body = await request.json()
        try:
            batch_id = store.start_batch(body)
        except (ValueError, KeyError, OSError) as exc:
            return _error(422, "invalid_batch", str(exc))
        return {"batch_id": batch_id}

    @app.get("/api/batch/{batch_id}")
    def batch_status(batch_id: str):
        try:
            return store.batch_status(batch_id)
        except UnknownBatch:
            return _error(404, "unknown_batch", batch_id)

    # -- static UI --------------------------------------------------------

    ui_path = Path(ui_dir) if ui_dir else None
    if ui_path and ui_path.exists():
        app.mount("/ui", StaticFiles(directory=str(ui_path), html=True), name="ui")

    return app


def app_factory() -> FastAPI:
    """uvicorn factory: configuration through the environment.

    VERIFY_CONFIG points at the pipeline config file, VERIFY_DATA_DIR
    at the storage directory, VERIFY_UI_DIR (optional) at a built UI.
    """
    cfg_path = os.environ.get("VERIFY_CONFIG")
    cfg = PipelineConfig.from_file(cfg_path) if cfg_path else PipelineConfig()
    data_dir = os.environ.get("VERIFY_DATA_DIR", "./verify-data")
    ui_dir = os.environ.get("VERIFY_UI_DIR")
    return build_app(cfg, data_dir, ui_dir=ui_dir)
