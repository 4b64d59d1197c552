"""Per-run verification report: canonical JSON plus a readable rendering.

A verified report embeds the full composed compiling unit; a negative
report keeps every finished step and the diagnostics that stopped the
run, so the reason is visible without replaying the session.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .events import AGENT_CALLED, COMPILE_CHECKED, STEP_STARTED
from .session import FINISHED, VERIFIED, VERIFIED_TRIVIAL, VerificationSession, WorkItem

SCHEMA_VERSION = 1

_TIMING_KEYS = {"ts", "latency", "elapsed", "wall_clock", "created_at", "updated_at"}


@dataclass
class Report:
    problem_id: str
    mode: str
    options: dict[str, Any]
    verdict: dict[str, Any]
    steps: list[dict[str, Any]]
    facts: list[dict[str, Any]]
    lemmas: list[dict[str, Any]]
    goal: dict[str, Any] | None
    bridge: dict[str, Any] | None
    composed_proof: dict[str, Any] | None
    derivation_order: list[int]
    link: dict[str, Any] | None
    assumed_facts: list[str]
    transcripts: list[dict[str, Any]]
    compile_checks: list[dict[str, Any]] = field(default_factory=list)
    violations: list[dict[str, Any]] = field(default_factory=list)
    sweep: dict[str, str] | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "problem_id": self.problem_id,
            "mode": self.mode,
            "options": self.options,
            "verdict": self.verdict,
            "steps": self.steps,
            "facts": self.facts,
            "lemmas": self.lemmas,
            "goal": self.goal,
            "bridge": self.bridge,
            "composed_proof": self.composed_proof,
            "derivation_order": self.derivation_order,
            "link": self.link,
            "assumed_facts": self.assumed_facts,
            "transcripts": self.transcripts,
            "compile_checks": self.compile_checks,
            "violations": self.violations,
            "sweep": self.sweep,
        }

    def canonical_json(self, redact_timings: bool = False) -> str:
        payload = self.to_dict()
        if redact_timings:
            payload = _redact(payload)
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Report":
        fields = {k: v for k, v in d.items() if k != "schema_version"}
        return cls(schema_version=d.get("schema_version", SCHEMA_VERSION), **fields)


def _redact(value: Any) -> Any:
    if isinstance(value, dict):
        return {
            k: (0.0 if k in _TIMING_KEYS and isinstance(v, (int, float)) else _redact(v))
            for k, v in value.items()
        }
    if isinstance(value, list):
        return [_redact(v) for v in value]
    return value


def _item_record(item: WorkItem | None) -> dict[str, Any] | None:
    if item is None:
        return None
    record: dict[str, Any] = {
        "kind": item.kind,
        "key": item.key,
        "name": item.name,
        "statement": item.statement.text,
        "sid": item.statement.sid,
        "skipped": item.skipped,
        "attempts": item.attempts,
        "transcripts": list(item.transcripts),
        "formalization": item.form.to_dict() if item.form else None,
    }
    return record


def build_report(session: VerificationSession) -> Report:
    """Assemble the report from a finished session's state and events."""
    if session.state != FINISHED or session.verdict is None:
        raise ValueError("report requires a finished session")

    steps: list[dict[str, Any]] = []
    for i, event in enumerate(session.log.events):
        if event.kind != STEP_STARTED:
            continue
        end_ts = None
        for later in session.log.events[i + 1 :]:
            if later.kind == STEP_STARTED:
                end_ts = later.ts
                break
        if end_ts is None:
            end_ts = session.log.events[-1].ts
        steps.append(
            {
                "state": event.data["state"],
                "cursor": event.data.get("cursor"),
                "seq": event.seq,
                "ts": event.ts,
                "wall_clock": max(0.0, end_ts - event.ts),
            }
        )

    transcripts = []
    for event in session.log.events:
        if event.kind != AGENT_CALLED:
            continue
        transcripts.append(
            {
                "transcript_id": f"t{event.seq}",
                "role": event.data.get("role", ""),
                "purpose": event.data.get("purpose", ""),
                "target": event.data.get("target"),
                "prompt_sha": event.data.get("prompt_sha", ""),
                "attempt": event.data.get("attempt", 0),
                "latency": event.data.get("latency", 0.0),
                "error": event.data.get("error"),
            }
        )

    compile_checks = [
        {
            "unit_id": f"c{e.seq}",
            "purpose": e.data.get("purpose"),
            "target": e.data.get("target"),
            "status": e.data.get("status"),
            "elapsed": e.data.get("elapsed", 0.0),
        }
        for e in session.log.events
        if e.kind == COMPILE_CHECKED
    ]

    verdict_kind = session.verdict.kind
    composed = session.composed
    if composed is not None and verdict_kind not in (VERIFIED, VERIFIED_TRIVIAL):
        composed = dict(composed)  # keep for diagnosis, flag clearly
        composed["final"] = False
    elif composed is not None:
        composed = dict(composed)
        composed["final"] = True

    return Report(
        problem_id=session.problem.id,
        mode=session.mode,
        options={"introduce_variables": session.intro_variables},
        verdict=session.verdict.to_dict(),
        steps=steps,
        facts=[_item_record(f) for f in session.facts],
        lemmas=[_item_record(l) for l in session.lemmas],
        goal=_item_record(session.goal_item),
        bridge=_item_record(session.bridge_item),
        composed_proof=composed,
        derivation_order=list(session.link_info.get("derivation_order", [])) if session.link_info else [],
        link=session.link_info,
        assumed_facts=list(session.assumed),
        transcripts=transcripts,
        compile_checks=compile_checks,
        violations=list(session.violations),
    )


def render_text(report: Report) -> str:
    """Human-readable rendering of the report."""
    lines: list[str] = []
    verdict = report.verdict
    lines.append("=" * 64)
    lines.append(f"VERIFICATION REPORT - problem {report.problem_id}")
    lines.append("=" * 64)
    lines.append(f"mode: {report.mode}    introduce variables: "
                 f"{'on' if report.options.get('introduce_variables') else 'off'}")
    lines.append(f"verdict: {verdict['kind']}")
    if verdict.get("failing_step"):
        lines.append(f"failing step: {verdict['failing_step']}")
    if verdict.get("reason"):
        lines.append(f"reason: {verdict['reason']}")
    if report.assumed_facts:
        lines.append(f"ASSUMED WITHOUT PROOF: {', '.join(report.assumed_facts)}")
    if report.sweep:
        lines.append(f"variable sweep: on={report.sweep.get('on')} off={report.sweep.get('off')}")
    lines.append("")

    lines.append("steps:")
    for step in report.steps:
        cursor = "" if step.get("cursor") is None else f"[{step['cursor']}]"
        lines.append(f"  {step['seq']:>4}  {step['state']}{cursor}  ({step['wall_clock']:.3f}s)")
    lines.append("")

    def section(title: str, items: list[dict[str, Any] | None]) -> None:
        items = [i for i in items if i]
        if not items:
            return
        lines.append(f"{title}:")
        for item in items:
            form = item.get("formalization") or {}
            status = form.get("status", "-")
            flags = " [skipped]" if item.get("skipped") else ""
            lines.append(f"  {item['name']}: {status}{flags}")
            lines.append(f"    statement: {item['statement']}")
            if form.get("code"):
                lines.append(f"    code: {form['code']}")
            if form.get("proof_code"):
                lines.append(f"    proof: {form['proof_code']}")
            for diag in form.get("diagnostics", []):
                if diag.get("severity") == "error":
                    lines.append(f"    error: {diag.get('message')}")
        lines.append("")

    section("facts", report.facts)
    section("lemmas", report.lemmas)
    section("goal", [report.goal])
    section("bridge", [report.bridge])

    if report.violations:
        lines.append("structure violations:")
        for v in report.violations:
            lines.append(f"  - {v.get('message')}")
        lines.append("")

    if report.composed_proof and report.composed_proof.get("final"):
        lines.append("composed proof (full compiling unit):")
        lines.append("-" * 64)
        lines.append(report.composed_proof["code"].rstrip())
        lines.append("-" * 64)
    elif report.composed_proof:
        lines.append("composition attempt (did not finish):")
        lines.append(report.composed_proof["code"].rstrip())
    lines.append("")
    return "\n".join(lines)
