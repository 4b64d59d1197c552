"""Pipeline orchestration: automatic runs, sessions, reports."""

from __future__ import annotations

import uuid
from typing import Callable

from ..solution import ProblemStatement
from .config import AgentsConfig, BackendConfig, ConfigError, PipelineConfig
from .events import (
    AGENT_CALLED,
    COMPILE_CHECKED,
    DECISION_APPLIED,
    DECISION_REQUESTED,
    STEP_STARTED,
    VERDICT_REACHED,
    EventLog,
    SessionEvent,
)
from .report import Report, build_report, render_text
from .session import (
    ALL_DECISIONS,
    AWAITING_DECISION,
    AWAITING_SOLVE,
    ANALYZING_STRUCTURE,
    CHECKING_TRANSLATION,
    CTX_COMPILE_FAILURE,
    CTX_FACT_PROOF_FAILURE,
    CTX_LEMMA_PROOF_FAILURE,
    CTX_QUALITY_FAILURE,
    Decision,
    DecisionPending,
    FINISHED,
    FORMALIZING_FACTS,
    FORMALIZING_LEMMAS,
    IllegalDecision,
    INCONCLUSIVE,
    LEGAL_DECISIONS,
    LINKING,
    MODE_AUTOMATIC,
    MODE_INTERACTIVE,
    PROVING_FACTS,
    PROVING_LEMMAS,
    REFUTED,
    SESSION_STATES,
    SessionFinished,
    UnknownSession,
    Verdict,
    VERIFIED,
    VERIFIED_TRIVIAL,
    VerificationSession,
)

# favourability order for the two-pass variable sweep; ties go to the
# pass that introduced variables
_VERDICT_RANK = {REFUTED: 0, INCONCLUSIVE: 1, VERIFIED_TRIVIAL: 2, VERIFIED: 3}


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]


def run_single_pass(
    prob: ProblemStatement,
    cfg: PipelineConfig,
    intro_variables: bool,
    clock: Callable[[], float] | None = None,
    log: EventLog | None = None,
) -> VerificationSession:
    agents = cfg.build_agent_client(clock=clock)
    backend = cfg.build_backend()
    if log is None:
        log = EventLog(clock=clock) if clock else EventLog()
    session = VerificationSession(
        session_id=new_session_id(),
        problem=prob,
        cfg=cfg,
        mode=MODE_AUTOMATIC,
        intro_variables=intro_variables,
        agents=agents,
        backend=backend,
        log=log,
    )
    session.run_to_completion()
    return session


def run_automatic(
    prob: ProblemStatement,
    cfg: PipelineConfig,
    clock: Callable[[], float] | None = None,
) -> Report:
    """Run the whole automatic pipeline and build the report.

    With intro_variables == "both" two full passes run (variables on,
    then off) and the more favourable verdict wins, ties going to the
    on pass.
    """
    if cfg.intro_variables == "both":
        on_session = run_single_pass(prob, cfg, intro_variables=True, clock=clock)
        off_session = run_single_pass(prob, cfg, intro_variables=False, clock=clock)
        on_rank = _VERDICT_RANK[on_session.verdict.kind]
        off_rank = _VERDICT_RANK[off_session.verdict.kind]
        winner = on_session if on_rank >= off_rank else off_session
        report = build_report(winner)
        report.sweep = {"on": on_session.verdict.kind, "off": off_session.verdict.kind}
        return report
    intro = cfg.intro_variables == "on"
    session = run_single_pass(prob, cfg, intro_variables=intro, clock=clock)
    return build_report(session)


__all__ = [
    "AGENT_CALLED",
    "ALL_DECISIONS",
    "ANALYZING_STRUCTURE",
    "AWAITING_DECISION",
    "AWAITING_SOLVE",
    "AgentsConfig",
    "BackendConfig",
    "CHECKING_TRANSLATION",
    "COMPILE_CHECKED",
    "CTX_COMPILE_FAILURE",
    "CTX_FACT_PROOF_FAILURE",
    "CTX_LEMMA_PROOF_FAILURE",
    "CTX_QUALITY_FAILURE",
    "ConfigError",
    "DECISION_APPLIED",
    "DECISION_REQUESTED",
    "Decision",
    "DecisionPending",
    "EventLog",
    "FINISHED",
    "FORMALIZING_FACTS",
    "FORMALIZING_LEMMAS",
    "INCONCLUSIVE",
    "IllegalDecision",
    "LEGAL_DECISIONS",
    "LINKING",
    "MODE_AUTOMATIC",
    "MODE_INTERACTIVE",
    "PROVING_FACTS",
    "PROVING_LEMMAS",
    "PipelineConfig",
    "REFUTED",
    "Report",
    "SESSION_STATES",
    "STEP_STARTED",
    "SessionEvent",
    "SessionFinished",
    "UnknownSession",
    "VERDICT_REACHED",
    "VERIFIED",
    "VERIFIED_TRIVIAL",
    "Verdict",
    "VerificationSession",
    "build_report",
    "new_session_id",
    "render_text",
    "run_automatic",
    "run_single_pass",
]
