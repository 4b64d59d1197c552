"""Append-only session event log.

Every state transition and effect outcome becomes one event; folding
the events rebuilds the session exactly, which is what powers crash
recovery, resumable streaming and byte-stable reports.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

STEP_STARTED = "StepStarted"
AGENT_CALLED = "AgentCalled"
COMPILE_CHECKED = "CompileChecked"
DECISION_REQUESTED = "DecisionRequested"
DECISION_APPLIED = "DecisionApplied"
VERDICT_REACHED = "VerdictReached"

EVENT_KINDS = (
    STEP_STARTED,
    AGENT_CALLED,
    COMPILE_CHECKED,
    DECISION_REQUESTED,
    DECISION_APPLIED,
    VERDICT_REACHED,
)


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    ts: float
    kind: str
    data: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "data": self.data}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SessionEvent":
        return cls(seq=d["seq"], ts=d["ts"], kind=d["kind"], data=d["data"])


class EventLog:
    """Strictly ordered event sequence, optionally mirrored to a file.

    seq starts at 1 and increases by one per event; appends flush to
    the file sink immediately so a crash loses at most the event being
    written.
    """

    def __init__(self, path: str | Path | None = None, clock: Callable[[], float] = time.time):
        self.path = Path(path) if path else None
        self.clock = clock
        self.events: list[SessionEvent] = []
        self.on_append: Callable[[SessionEvent], None] | None = None

    @classmethod
    def load(cls, path: str | Path, clock: Callable[[], float] = time.time) -> "EventLog":
        """Read a log back; a truncated final line (crash mid-write) is
        dropped so the session resumes from the last whole event."""
        log = cls(path=path, clock=clock)
        file = Path(path)
        if not file.exists():
            return log
        lines = [l for l in file.read_text(encoding="utf-8").splitlines() if l.strip()]
        for i, line in enumerate(lines):
            try:
                log.events.append(SessionEvent.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                if i == len(lines) - 1:
                    break
                raise ValueError(f"corrupt event log {file} at line {i + 1}: {exc}") from exc
        return log

    @property
    def next_seq(self) -> int:
        return len(self.events) + 1

    @property
    def last_seq(self) -> int:
        return len(self.events)

    def append(self, kind: str, data: dict[str, Any]) -> SessionEvent:
        event = SessionEvent(seq=self.next_seq, ts=self.clock(), kind=kind, data=data)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(event.to_json() + "\n")
                fh.flush()
        self.events.append(event)
        if self.on_append is not None:
            self.on_append(event)
        return event

    def since(self, seq: int) -> list[SessionEvent]:
        """Events with seq strictly greater than the cursor."""
        return [e for e in self.events if e.seq > seq]

    def __iter__(self) -> Iterable[SessionEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)
