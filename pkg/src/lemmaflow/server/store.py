"""File-backed session, report and batch storage.

Layout (everything inspectable with a text editor):

    data/
      problems/<id>.json
      sessions/<sid>/meta.json
      sessions/<sid>/events.jsonl
      reports/<sid>.json
      batches/<bid>.json

No database: one directory per session, an append-only event log, and a
flat report store.  Restart = re-read; unfinished sessions resume by
replaying their logs.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from pathlib import Path
from typing import Any, Callable

from ..bench import DatasetRecord, compute_metrics, load_dataset, run_batch
from ..pipeline import (
    AWAITING_DECISION,
    Decision,
    EventLog,
    PipelineConfig,
    Report,
    SessionEvent,
    UnknownSession,
    VerificationSession,
    build_report,
    new_session_id,
    render_text,
)
from ..solution import ProblemStatement


logger = logging.getLogger(__name__)


class NotAwaitingDecision(Exception):
    pass


class StaleSequence(Exception):
    pass


class UnknownProblem(Exception):
    pass


class UnknownBatch(Exception):
    pass


class SessionStore:
    def __init__(
        self,
        data_dir: str | Path,
        cfg: PipelineConfig,
        clock: Callable[[], float] = time.time,
        max_batch_workers: int = 2,
    ):
        self.root = Path(data_dir)
        self.cfg = cfg
        self.clock = clock
        self.max_batch_workers = max_batch_workers
        for sub in ("problems", "sessions", "reports", "batches"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, VerificationSession] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._conditions: dict[str, threading.Condition] = {}
        self._batches: dict[str, dict[str, Any]] = {}
        self._registry_lock = threading.Lock()
        self._batch_sem = threading.BoundedSemaphore(max_batch_workers)

    # ------------------------------------------------------------------
    # problems
    # ------------------------------------------------------------------

    def save_problem(self, problem: ProblemStatement) -> str:
        path = self.root / "problems" / f"{problem.id}.json"
        path.write_text(
            json.dumps(problem.to_dict(), sort_keys=True, ensure_ascii=False, indent=2),
            encoding="utf-8",
        )
        return problem.id

    def load_problem(self, problem_id: str) -> ProblemStatement:
        path = self.root / "problems" / f"{problem_id}.json"
        if not path.exists():
            raise UnknownProblem(problem_id)
        return ProblemStatement.from_dict(json.loads(path.read_text(encoding="utf-8")))

    # ------------------------------------------------------------------
    # sessions
    # ------------------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def _lock_for(self, session_id: str) -> threading.RLock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.RLock())

    def _condition_for(self, session_id: str) -> threading.Condition:
        with self._registry_lock:
            return self._conditions.setdefault(session_id, threading.Condition())

    def _wire_notifications(self, session: VerificationSession) -> None:
        condition = self._condition_for(session.session_id)

        def on_append(_event: SessionEvent) -> None:
            with condition:
                condition.notify_all()

        session.log.on_append = on_append

    def create_session(
        self, problem_id: str, mode: str, introduce_variables: bool | None = None
    ) -> VerificationSession:
        problem = self.load_problem(problem_id)
        if introduce_variables is None:
            introduce_variables = self.cfg.intro_variables != "off"
        session_id = new_session_id()
        sdir = self._session_dir(session_id)
        sdir.mkdir(parents=True)
        meta = {
            "session_id": session_id,
            "problem_id": problem_id,
            "mode": mode,
            "introduce_variables": introduce_variables,
            "created_at": self.clock(),
        }
        (sdir / "meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2), encoding="utf-8"
        )
        session = VerificationSession(
            session_id=session_id,
            problem=problem,
            cfg=self.cfg,
            mode=mode,
            intro_variables=introduce_variables,
            agents=self.cfg.build_agent_client(clock=self.clock),
            backend=self.cfg.build_backend(),
            log=EventLog(path=sdir / "events.jsonl", clock=self.clock),
        )
        self._wire_notifications(session)
        with self._registry_lock:
            self._sessions[session_id] = session
        return session

    def known_session_ids(self) -> list[str]:
        on_disk = {p.name for p in (self.root / "sessions").iterdir() if p.is_dir()}
        with self._registry_lock:
            return sorted(on_disk | set(self._sessions))

    def get_session(self, session_id: str) -> VerificationSession:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is not None:
            return session
        sdir = self._session_dir(session_id)
        meta_path = sdir / "meta.json"
        if not meta_path.exists():
            raise UnknownSession(session_id)
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        problem = self.load_problem(meta["problem_id"])
        log = EventLog.load(sdir / "events.jsonl", clock=self.clock)
        session = VerificationSession(
            session_id=session_id,
            problem=problem,
            cfg=self.cfg,
            mode=meta["mode"],
            intro_variables=meta.get("introduce_variables", True),
            agents=self.cfg.build_agent_client(clock=self.clock),
            backend=self.cfg.build_backend(),
            log=log,
        )
        self._wire_notifications(session)
        with self._registry_lock:
            self._sessions.setdefault(session_id, session)
            return self._sessions[session_id]

    def summary(self, session_id: str) -> dict[str, Any]:
        session = self.get_session(session_id)
        meta = json.loads(
            (self._session_dir(session_id) / "meta.json").read_text(encoding="utf-8")
        )
        return {
            "session_id": session_id,
            "problem_id": session.problem.id,
            "mode": session.mode,
            "state": session.state,
            "cursor": session.cursor,
            "created_at": meta.get("created_at"),
            "updated_at": session.log.events[-1].ts if session.log.events else meta.get("created_at"),
            "verdict": session.verdict.to_dict() if session.verdict else None,
        }

    # ------------------------------------------------------------------
    # drivers
    # ------------------------------------------------------------------

    def drive(self, session_id: str) -> None:
        """Advance until decision or completion; persist the report at the end."""
        session = self.get_session(session_id)
        lock = self._lock_for(session_id)
        with lock:
            try:
                while not session.finished and session.state != AWAITING_DECISION:
                    session.advance()
            except Exception:
                logger.exception("session %s driver died in state %s", session_id, session.state)
                raise
            if session.finished:
                self.save_report(session)

    def drive_in_background(self, session_id: str) -> threading.Thread:
        thread = threading.Thread(target=self.drive, args=(session_id,), daemon=True)
        thread.start()
        return thread

    def resume_unfinished(self) -> list[str]:
        """Called at startup: resume sessions the previous process left running."""
        resumed = []
        for session_id in self.known_session_ids():
            try:
                session = self.get_session(session_id)
            except (UnknownSession, UnknownProblem):
                continue
            if session.finished:
                continue
            if session.state == AWAITING_DECISION:
                continue  # waits for its human; nothing to drive yet
            self.drive_in_background(session_id)
            resumed.append(session_id)
        return resumed

    def apply_decision(self, session_id: str, decision: Decision) -> SessionEvent:
        session = self.get_session(session_id)
        lock = self._lock_for(session_id)
        with lock:
            if session.finished or session.state != AWAITING_DECISION:
                raise NotAwaitingDecision(
                    f"session {session_id} is in {session.state}"
                )
            if decision.expected_seq is not None and decision.expected_seq != session.log.last_seq:
                raise StaleSequence(
                    f"expected_seq {decision.expected_seq} != current {session.log.last_seq}"
                )
            event = session.apply_decision(decision)  # IllegalDecision may raise
        self.drive_in_background(session_id)
        return event

    # ------------------------------------------------------------------
    # events
    # ------------------------------------------------------------------

    def events_since(self, session_id: str, since: int) -> list[SessionEvent]:
        return self.get_session(session_id).log.since(since)

    def wait_for_events(self, session_id: str, since: int, timeout: float = 1.0) -> list[SessionEvent]:
        session = self.get_session(session_id)
        fresh = session.log.since(since)
        if fresh:
            return fresh
        condition = self._condition_for(session_id)
        with condition:
            condition.wait(timeout=timeout)
        return session.log.since(since)

    # ------------------------------------------------------------------
    # reports
    # ------------------------------------------------------------------

    def save_report(self, session: VerificationSession) -> Report:
        report = build_report(session)
        path = self.root / "reports" / f"{session.session_id}.json"
        path.write_text(report.canonical_json(), encoding="utf-8")
        return report

    def load_report(self, session_id: str) -> Report:
        path = self.root / "reports" / f"{session_id}.json"
        if not path.exists():
            # a finished session whose report was never flushed (crash
            # between verdict and save): rebuild from the event log
            session = self.get_session(session_id)
            if session.finished:
                return self.save_report(session)
            raise UnknownSession(session_id)
        return Report.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def render_report(self, session_id: str) -> str:
        return render_text(self.load_report(session_id))

    # ------------------------------------------------------------------
    # batches
    # ------------------------------------------------------------------

    def start_batch(self, payload: dict[str, Any]) -> str:
        if "records" in payload:
            records = [
                DatasetRecord(
                    problem=ProblemStatement.from_dict(r),
                    label=bool(r["label"]),
                    reference_answer=r.get("answer"),
                )
                for r in payload["records"]
            ]
        elif "dataset_path" in payload:
            records = load_dataset(payload["dataset_path"])
        else:
            raise ValueError("batch needs records or dataset_path")
        n_runs = int(payload.get("n_runs", 1))
        include_trivial = bool(payload.get("include_trivial", False))
        batch_id = new_session_id()
        state: dict[str, Any] = {
            "batch_id": batch_id,
            "status": "running",
            "total": len(records) * n_runs,
            "completed": 0,
            "n_runs": n_runs,
            "metrics": None,
            "verdicts": None,
        }
        with self._registry_lock:
            self._batches[batch_id] = state

        def progress(_pid: str, _run: int, _kind: str) -> None:
            state["completed"] += 1

        def work() -> None:
            with self._batch_sem:
                try:
                    verdicts = run_batch(records, self.cfg, n_runs=n_runs, progress=progress)
                    metrics = compute_metrics(
                        verdicts, [r.label for r in records], include_trivial=include_trivial
                    )
                    state["verdicts"] = {
                        rec.problem.id: row for rec, row in zip(records, verdicts)
                    }
                    state["metrics"] = metrics.to_dict()
                    state["status"] = "done"
                except Exception as exc:  # surfaced through the status endpoint
                    state["status"] = "failed"
                    state["error"] = str(exc)
            (self.root / "batches" / f"{batch_id}.json").write_text(
                json.dumps(state, sort_keys=True, indent=2), encoding="utf-8"
            )

        threading.Thread(target=work, daemon=True).start()
        return batch_id

    def batch_status(self, batch_id: str) -> dict[str, Any]:
        with self._registry_lock:
            state = self._batches.get(batch_id)
        if state is not None:
            return state
        path = self.root / "batches" / f"{batch_id}.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        raise UnknownBatch(batch_id)
