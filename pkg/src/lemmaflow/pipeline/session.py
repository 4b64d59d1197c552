"""Event-sourced verification session.

One session drives one problem through the six stages: solve, analyze
structure, formalize + prove facts, formalize lemmas + check the
translation, prove lemmas, link.  Every effect outcome is appended to
the event log; folding the log reconstructs the session exactly, so a
crashed or detached session resumes where it stopped.

Automatic mode turns any failure into a terminal verdict; interactive
mode pauses in AwaitingDecision and lets a human adjudicate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Any

from ..agents import AgentClient, AgentError, PromptOptions
from ..backend import (
    ACCEPTED_WITHOUT_PROOF,
    COMPILE_ERROR,
    COMPILE_OK,
    ESTABLISHED_STATUSES,
    PROOF_FAILED,
    PROVED_OK,
    UNCHECKED,
    BackendUnavailable,
    Formalization,
    ProverBackend,
    attempt_proof,
    check_statement,
    proposition_of,
    trivial_check,
)
from ..linker import (
    CompositionCompileError,
    build_hypergraph,
    check_reachability,
    compose_final_proof,
    final_gap_repair,
)
from ..solution import (
    ClassificationError,
    Lemma,
    NormalizationCycle,
    ParseError,
    ProblemStatement,
    Statement,
    StructuredSolution,
    classify_premises,
    extract_givens,
    normalize,
    parse_structured_solution,
    validate_structure,
)
from .config import PipelineConfig
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
from .quality import translation_quality_issues

# ---------------------------------------------------------------------------
# states / modes / decisions / verdicts
# ---------------------------------------------------------------------------

MODE_AUTOMATIC = "automatic"
MODE_INTERACTIVE = "interactive"

AWAITING_SOLVE = "AwaitingSolve"
ANALYZING_STRUCTURE = "AnalyzingStructure"
FORMALIZING_FACTS = "FormalizingFacts"
PROVING_FACTS = "ProvingFacts"
FORMALIZING_LEMMAS = "FormalizingLemmas"
CHECKING_TRANSLATION = "CheckingTranslation"
PROVING_LEMMAS = "ProvingLemmas"
LINKING = "Linking"
AWAITING_DECISION = "AwaitingDecision"
FINISHED = "Finished"

SESSION_STATES = (
    AWAITING_SOLVE,
    ANALYZING_STRUCTURE,
    FORMALIZING_FACTS,
    PROVING_FACTS,
    FORMALIZING_LEMMAS,
    CHECKING_TRANSLATION,
    PROVING_LEMMAS,
    LINKING,
    AWAITING_DECISION,
    FINISHED,
)

VERIFIED = "Verified"
VERIFIED_TRIVIAL = "VerifiedTrivial"
REFUTED = "Refuted"
INCONCLUSIVE = "Inconclusive"

CONTINUE_WITHOUT_FACT = "ContinueWithoutFact"
ACCEPT_WITHOUT_PROOF = "AcceptWithoutProof"
MARK_FALSE_AND_STOP = "MarkFalseAndStop"
RETRY_PROVER = "RetryProver"
PROVIDE_TRANSLATION = "ProvideTranslation"
PROVIDE_FORMALIZATION = "ProvideFormalization"
STOP_NEGATIVE = "StopNegative"

ALL_DECISIONS = (
    CONTINUE_WITHOUT_FACT,
    ACCEPT_WITHOUT_PROOF,
    MARK_FALSE_AND_STOP,
    RETRY_PROVER,
    PROVIDE_TRANSLATION,
    PROVIDE_FORMALIZATION,
    STOP_NEGATIVE,
)

CTX_FACT_PROOF_FAILURE = "fact_proof_failure"
CTX_LEMMA_PROOF_FAILURE = "lemma_proof_failure"
CTX_COMPILE_FAILURE = "compile_failure"
CTX_QUALITY_FAILURE = "quality_failure"

LEGAL_DECISIONS: dict[str, tuple[str, ...]] = {
    CTX_FACT_PROOF_FAILURE: (
        CONTINUE_WITHOUT_FACT,
        ACCEPT_WITHOUT_PROOF,
        MARK_FALSE_AND_STOP,
        RETRY_PROVER,
        PROVIDE_TRANSLATION,
    ),
    CTX_LEMMA_PROOF_FAILURE: (
        CONTINUE_WITHOUT_FACT,
        ACCEPT_WITHOUT_PROOF,
        MARK_FALSE_AND_STOP,
        RETRY_PROVER,
        PROVIDE_TRANSLATION,
    ),
    CTX_COMPILE_FAILURE: (PROVIDE_FORMALIZATION, STOP_NEGATIVE),
    CTX_QUALITY_FAILURE: (PROVIDE_FORMALIZATION, STOP_NEGATIVE),
}


@dataclass(frozen=True)
class Decision:
    type: str
    code: str | None = None
    expected_seq: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.type, "code": self.code, "expected_seq": self.expected_seq}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Decision":
        return cls(type=d.get("type", ""), code=d.get("code"), expected_seq=d.get("expected_seq"))


@dataclass(frozen=True)
class Verdict:
    kind: str
    failing_step: str | None = None
    reason: str = ""
    assumed_facts: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind in (VERIFIED, VERIFIED_TRIVIAL) and self.failing_step is not None:
            raise ValueError("a verified verdict cannot carry a failing step")
        if self.kind in (REFUTED, INCONCLUSIVE) and self.failing_step is None:
            raise ValueError(f"{self.kind} verdict requires a failing step")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "failing_step": self.failing_step,
            "reason": self.reason,
            "assumed_facts": list(self.assumed_facts),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Verdict":
        return cls(
            kind=d["kind"],
            failing_step=d.get("failing_step"),
            reason=d.get("reason", ""),
            assumed_facts=tuple(d.get("assumed_facts", ())),
        )


class SessionFinished(Exception):
    pass


class DecisionPending(Exception):
    pass


class IllegalDecision(Exception):
    pass


class UnknownSession(Exception):
    pass


@dataclass
class WorkItem:
    kind: str  # "fact" | "lemma" | "goal" | "bridge"
    key: str
    name: str
    statement: Statement
    form: Formalization | None = None
    attempts: int = 0
    skipped: bool = False
    first_use: int = 0  # facts: index of the first citing lemma
    pending_proof: str | None = None
    transcripts: list[str] = field(default_factory=list)

    @property
    def established(self) -> bool:
        return self.form is not None and self.form.status in ESTABLISHED_STATUSES


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# session
# ---------------------------------------------------------------------------


class VerificationSession:
    """Single-writer state machine over an append-only event log."""

    def __init__(
        self,
        session_id: str,
        problem: ProblemStatement,
        cfg: PipelineConfig,
        mode: str,
        intro_variables: bool,
        agents: AgentClient,
        backend: ProverBackend,
        log: EventLog | None = None,
    ):
        if mode not in (MODE_AUTOMATIC, MODE_INTERACTIVE):
            raise ValueError(f"unknown mode {mode!r}")
        self.session_id = session_id
        self.problem = problem
        self.cfg = cfg
        self.mode = mode
        self.intro_variables = intro_variables
        self.agents = agents
        self.backend = backend
        self.log = log if log is not None else EventLog()

        # derived state, rebuilt by folding events
        self.state = AWAITING_SOLVE
        self.cursor: int | None = None
        self.context: dict[str, Any] | None = None
        self.raw_solution: str | None = None
        self.solution: StructuredSolution | None = None
        self.derivation_error: dict[str, str] | None = None
        self.violations: list[dict[str, Any]] = []
        self.facts: list[WorkItem] = []
        self.lemmas: list[WorkItem] = []
        self.goal_item: WorkItem | None = None
        self.bridge_item: WorkItem | None = None
        self.bridge_lemma: Lemma | None = None
        self.trivial = False
        self.assumed: list[str] = []
        self.verdict: Verdict | None = None
        self.composed: dict[str, Any] | None = None
        self.link_info: dict[str, Any] | None = None

        for event in self.log.events:
            self._apply(event)

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self.state == FINISHED

    @property
    def opts(self) -> PromptOptions:
        return PromptOptions(introduce_variables=self.intro_variables)

    def _emit(self, kind: str, data: dict[str, Any]) -> SessionEvent:
        event = self.log.append(kind, data)
        self._apply(event)
        return event

    def _emit_step(self, state: str, cursor: int | None = None) -> SessionEvent:
        return self._emit(STEP_STARTED, {"state": state, "cursor": cursor})

    def _emit_verdict(self, kind: str, failing_step=None, reason="") -> SessionEvent:
        verdict = Verdict(
            kind=kind,
            failing_step=failing_step,
            reason=reason,
            assumed_facts=tuple(self.assumed),
        )
        return self._emit(VERDICT_REACHED, {"verdict": verdict.to_dict(), "link": self.link_info})

    def _item(self, target: dict[str, Any]) -> WorkItem:
        kind, key = target["kind"], target["key"]
        if kind == "fact":
            for item in self.facts:
                if item.key == key:
                    return item
        elif kind == "lemma":
            for item in self.lemmas:
                if item.key == key:
                    return item
        elif kind == "goal":
            assert self.goal_item is not None
            return self.goal_item
        elif kind == "bridge":
            if self.bridge_item is None:
                self._create_bridge_item()
            assert self.bridge_item is not None
            return self.bridge_item
        raise KeyError(f"no work item for {target}")

    def _negative(self, failing_step: str, reason: str, *, infrastructure: bool) -> SessionEvent:
        kind = INCONCLUSIVE if infrastructure else REFUTED
        return self._emit_verdict(kind, failing_step=failing_step, reason=reason)

    # ------------------------------------------------------------------
    # reducer: every event, live or replayed, passes through here
    # ------------------------------------------------------------------

    def _apply(self, event: SessionEvent) -> None:
        data = event.data
        if event.kind == STEP_STARTED:
            self.state = data["state"]
            self.cursor = data.get("cursor")
        elif event.kind == AGENT_CALLED:
            self._apply_agent_called(event)
        elif event.kind == COMPILE_CHECKED:
            self._apply_compile_checked(event)
        elif event.kind == DECISION_REQUESTED:
            self.state = AWAITING_DECISION
            self.context = data["context"]
        elif event.kind == DECISION_APPLIED:
            self._apply_decision_event(data)
        elif event.kind == VERDICT_REACHED:
            self.verdict = Verdict.from_dict(data["verdict"])
            if data.get("link") is not None:
                self.link_info = data["link"]
            self.state = FINISHED
            self.context = None

    def _apply_agent_called(self, event: SessionEvent) -> None:
        data = event.data
        if data.get("error"):
            return
        purpose = data["purpose"]
        if purpose == "solve":
            self.raw_solution = data["output"]
            self._derive_structure()
            return
        target = data["target"]
        item = self._item(target)
        item.transcripts.append(f"t{event.seq}")
        if purpose == "formalize":
            item.form = Formalization(
                name=item.name,
                source_sid=item.statement.sid,
                code=proposition_of(data["output"]),
                status=UNCHECKED,
            )
        elif purpose == "prove":
            item.pending_proof = data["output"]

    def _apply_compile_checked(self, event: SessionEvent) -> None:
        data = event.data
        purpose = data["purpose"]
        if purpose == "composed":
            self.composed = {
                "code": data["code"],
                "status": data["status"],
                "diagnostics": data.get("diagnostics", []),
                "unit_id": f"c{event.seq}",
            }
            return
        item = self._item(data["target"])
        if purpose == "trivial":
            self.trivial = data["status"] == "Ok"
            return
        assert item.form is not None
        diags = tuple(_dict_to_diag(d) for d in data.get("diagnostics", []))
        if purpose == "statement":
            status = COMPILE_OK if data["status"] == "Ok" else COMPILE_ERROR
            item.form = replace(item.form, status=status, diagnostics=diags)
        elif purpose == "proof":
            item.form = replace(
                item.form,
                status=data["form_status"],
                proof_code=data.get("proof_code"),
                diagnostics=diags,
            )
            item.attempts += 1

    def _apply_decision_event(self, data: dict[str, Any]) -> None:
        context = self.context or {}
        decision_type = data["type"]
        resume = context.get("resume", {})
        target = context.get("target")
        item = self._item(target) if target else None
        if decision_type == CONTINUE_WITHOUT_FACT and item is not None:
            item.skipped = True
        elif decision_type == ACCEPT_WITHOUT_PROOF and item is not None and item.form is not None:
            item.form = replace(item.form, status=ACCEPTED_WITHOUT_PROOF)
            if item.statement.sid not in self.assumed:
                self.assumed.append(item.statement.sid)
        elif decision_type == RETRY_PROVER and item is not None and item.form is not None:
            item.form = replace(item.form, status=COMPILE_OK, diagnostics=())
        elif decision_type in (PROVIDE_TRANSLATION, PROVIDE_FORMALIZATION) and item is not None:
            code = proposition_of(data.get("code") or "")
            base = item.form or Formalization(
                name=item.name, source_sid=item.statement.sid, code=code
            )
            item.form = replace(
                base, code=code, status=UNCHECKED, diagnostics=(), proof_code=None
            )
        # MarkFalseAndStop / StopNegative mutate nothing; the verdict
        # event that follows finishes the session
        self.context = None
        if decision_type not in (MARK_FALSE_AND_STOP, STOP_NEGATIVE):
            self.state = resume.get("state", self.state)
            self.cursor = resume.get("cursor")

    # ------------------------------------------------------------------
    # pure derivation of structure from the solver's raw text
    # ------------------------------------------------------------------

    def _derive_structure(self) -> None:
        assert self.raw_solution is not None
        try:
            sol = parse_structured_solution(self.raw_solution, problem_id=self.problem.id)
            sol = normalize(sol, rewrite_rules=self.cfg.rewrite_rules)
            violations = validate_structure(sol, intro_variables=self.intro_variables)
            self.violations = [v.to_dict() for v in violations]
            if violations:
                self.solution = sol
                return
            sol = classify_premises(sol, self.problem)
        except ParseError as exc:
            self.derivation_error = {
                "code": exc.code,
                "message": str(exc),
                "stage": "parse",
            }
            return
        except NormalizationCycle as exc:
            self.derivation_error = {"code": "NormalizationCycle", "message": str(exc), "stage": "normalize"}
            return
        except ClassificationError as exc:
            self.derivation_error = {"code": "ProvenanceMismatch", "message": str(exc), "stage": "classify"}
            return
        self.solution = sol
        self._build_work_items()

    def _build_work_items(self) -> None:
        sol = self.solution
        assert sol is not None
        self.facts = []
        seen: set[str] = set()
        for lem in sol.lemmas:
            for p in lem.premises:
                if p.provenance is not None and p.provenance.kind == "fact" and p.statement.sid not in seen:
                    seen.add(p.statement.sid)
                    self.facts.append(
                        WorkItem(
                            kind="fact",
                            key=p.statement.sid,
                            name=f"fact_{p.statement.sid[:8]}",
                            statement=p.statement,
                            first_use=lem.index,
                        )
                    )
        self.lemmas = [
            WorkItem(kind="lemma", key=str(lem.index), name=f"lemma_{lem.index}", statement=lem.conclusion)
            for lem in sol.lemmas
        ]
        goal_form = None
        if self.problem.trusted_goal:
            goal_form = Formalization(
                name="solution_goal",
                source_sid=sol.goal.sid,
                code=proposition_of(self.problem.trusted_goal),
                status=UNCHECKED,
            )
        self.goal_item = WorkItem(
            kind="goal", key="goal", name="solution_goal", statement=sol.goal, form=goal_form
        )

    def _create_bridge_item(self) -> None:
        bridge = self._compute_bridge_lemma()
        stmt = self.solution.goal if self.solution else Statement.of("goal")
        self.bridge_lemma = bridge
        self.bridge_item = WorkItem(
            kind="bridge",
            key="bridge",
            name="bridge_lemma",
            statement=stmt,
        )

    def _compute_bridge_lemma(self) -> Lemma | None:
        graph = build_hypergraph(self.solution)
        link = check_reachability(
            graph,
            established_sources=self._established_sources(graph),
            active_lemmas=self._active_lemma_indices(),
        )
        goal_form = self.goal_item.form if self.goal_item else None
        return final_gap_repair(graph, goal_form, link)

    # ------------------------------------------------------------------
    # context data shared by handlers
    # ------------------------------------------------------------------

    def _fact_context_statements(self, item: WorkItem) -> list[Statement]:
        assert self.solution is not None
        return [lem.conclusion for lem in self.solution.lemmas if lem.index < item.first_use]

    def _lemma_premise_statements(self, index: int) -> list[Statement]:
        assert self.solution is not None
        lem = self.solution.lemma_by_index(index)
        assert lem is not None
        return [p.statement for p in lem.premises]

    def _lemma_hypothesis_forms(self, index: int) -> list[Formalization]:
        """Facts cited by this lemma, then all earlier lemma conclusions."""
        assert self.solution is not None
        lem = self.solution.lemma_by_index(index)
        assert lem is not None
        forms: list[Formalization] = []
        cited = {p.statement.sid for p in lem.premises}
        for fact in self.facts:
            if fact.key in cited and fact.established:
                forms.append(fact.form)
        for other in self.lemmas:
            if int(other.key) < index and other.established:
                forms.append(other.form)
        return forms

    def _established_sources(self, graph) -> set[str]:
        sources: set[str] = set()
        for sid, node in graph.nodes.items():
            if node.kind == "given":
                sources.add(sid)
        for fact in self.facts:
            if fact.established and not fact.skipped:
                sources.add(fact.key)
        return sources

    def _active_lemma_indices(self) -> set[int]:
        active = {int(item.key) for item in self.lemmas if item.established and not item.skipped}
        if self.bridge_item is not None and self.bridge_item.established and self.bridge_lemma:
            active.add(self.bridge_lemma.index)
        return active

    def _variables(self) -> list:
        if self.solution is None:
            return []
        return list(self.solution.variables) if self.intro_variables else []

    # ------------------------------------------------------------------
    # effectful micro-steps
    # ------------------------------------------------------------------

    def advance(self) -> SessionEvent:
        """Run one micro-step; returns the last event it appended."""
        if self.state == FINISHED:
            raise SessionFinished(self.session_id)
        if self.state == AWAITING_DECISION:
            raise DecisionPending(self.session_id)
        handler = {
            AWAITING_SOLVE: self._h_awaiting_solve,
            ANALYZING_STRUCTURE: self._h_analyzing,
            FORMALIZING_FACTS: self._h_formalizing_facts,
            PROVING_FACTS: self._h_proving_facts,
            FORMALIZING_LEMMAS: self._h_formalizing_lemmas,
            CHECKING_TRANSLATION: self._h_checking_translation,
            PROVING_LEMMAS: self._h_proving_lemmas,
            LINKING: self._h_linking,
        }[self.state]
        return handler()

    def run_to_completion(self) -> Verdict:
        """Automatic driver: advance until the session finishes."""
        while not self.finished:
            if self.state == AWAITING_DECISION:
                raise DecisionPending(self.session_id)
            self.advance()
        assert self.verdict is not None
        return self.verdict

    def run_until_pause(self) -> None:
        """Interactive driver: advance until a decision is needed or done."""
        while not self.finished and self.state != AWAITING_DECISION:
            self.advance()

    # -- agent / backend wrappers that standardize failure handling ----

    def _call_agent(self, purpose: str, target: dict | None, fn) -> SessionEvent | None:
        """Run an agent call; on success emit AgentCalled and return None,
        on infrastructure failure emit the event plus an Inconclusive
        verdict and return that terminal event."""
        try:
            output, transcript = fn()
        except AgentError as exc:
            transcript = self.agents.transcripts[-1] if self.agents.transcripts else None
            self._emit(
                AGENT_CALLED,
                {
                    "purpose": purpose,
                    "target": target,
                    "role": transcript.role.value if transcript else "",
                    "prompt": transcript.prompt if transcript else "",
                    "prompt_sha": _sha(transcript.prompt) if transcript else "",
                    "response": transcript.response if transcript else None,
                    "attempt": transcript.attempt if transcript else 0,
                    "latency": transcript.latency if transcript else 0.0,
                    "output": None,
                    "error": exc.kind,
                },
            )
            return self._negative(
                self.state, f"agent failure during {purpose}: {exc}", infrastructure=True
            )
        self._emit(
            AGENT_CALLED,
            {
                "purpose": purpose,
                "target": target,
                "role": transcript.role.value,
                "prompt": transcript.prompt,
                "prompt_sha": _sha(transcript.prompt),
                "response": transcript.response,
                "attempt": transcript.attempt,
                "latency": transcript.latency,
                "output": output,
                "error": None,
            },
        )
        return None

    def _compile_statement(self, item: WorkItem) -> SessionEvent | None:
        """Compile-check the item's statement; emit CompileChecked.
        Returns a terminal event on BackendUnavailable."""
        try:
            _, result = check_statement(
                self.backend,
                item.form,
                import_header=self.cfg.backend.import_header,
                timeout=self.cfg.backend.compile_timeout,
            )
        except BackendUnavailable as exc:
            return self._negative(self.state, f"backend unavailable: {exc}", infrastructure=True)
        self._emit(
            COMPILE_CHECKED,
            {
                "purpose": "statement",
                "target": {"kind": item.kind, "key": item.key},
                "status": result.status,
                "diagnostics": [d.to_dict() for d in result.diagnostics],
                "code": item.form.code,
                "elapsed": result.elapsed,
            },
        )
        return None

    def _handle_compile_failure(self, item: WorkItem) -> SessionEvent:
        reason = _diag_summary(item.form.diagnostics)
        if self.mode == MODE_AUTOMATIC:
            return self._negative(
                self.state, f"{item.name} failed to compile: {reason}", infrastructure=False
            )
        return self._request_decision(CTX_COMPILE_FAILURE, item)

    def _request_decision(self, ctx_kind: str, item: WorkItem, extra: dict | None = None) -> SessionEvent:
        context = {
            "kind": ctx_kind,
            "target": {"kind": item.kind, "key": item.key},
            "statement": item.statement.text,
            "code": item.form.code if item.form else None,
            "proof_code": item.form.proof_code if item.form else None,
            "diagnostics": [d.to_dict() for d in (item.form.diagnostics if item.form else ())],
            "legal": list(LEGAL_DECISIONS[ctx_kind]),
            "resume": {"state": self.state, "cursor": self.cursor},
        }
        if extra:
            context.update(extra)
        return self._emit(DECISION_REQUESTED, {"context": context})

    def _prove_item(self, item: WorkItem, ctx_kind: str, hypothesis_forms: list[Formalization]) -> SessionEvent:
        """One prover attempt followed by a proof compile check."""
        hypothesis_codes = [f"{f.name} : {f.code}" for f in hypothesis_forms]
        terminal = self._call_agent(
            "prove",
            {"kind": item.kind, "key": item.key},
            lambda: self.agents.prove(item.form.code, hypothesis_codes, self.opts),
        )
        if terminal is not None:
            return terminal
        proof = item.pending_proof
        assert proof is not None
        try:
            proved, result = attempt_proof(
                self.backend,
                item.form,
                hypothesis_forms,
                proof,
                import_header=self.cfg.backend.import_header,
                markers=self.cfg.backend.incomplete_markers,
                timeout=self.cfg.backend.compile_timeout,
            )
        except BackendUnavailable as exc:
            return self._negative(self.state, f"backend unavailable: {exc}", infrastructure=True)
        self._emit(
            COMPILE_CHECKED,
            {
                "purpose": "proof",
                "target": {"kind": item.kind, "key": item.key},
                "status": result.status,
                "form_status": proved.status,
                "proof_code": proof,
                "diagnostics": [d.to_dict() for d in proved.diagnostics],
                "code": item.form.code,
                "elapsed": result.elapsed,
            },
        )
        if item.form.status == PROVED_OK:
            return self.log.events[-1]
        # proof failed
        if self.mode == MODE_AUTOMATIC:
            if item.attempts >= 1 + self.cfg.prover_retries:
                return self._negative(
                    self.state,
                    f"{item.name} could not be proven after {item.attempts} attempts",
                    infrastructure=False,
                )
            return self.log.events[-1]  # stay; next advance retries
        return self._request_decision(ctx_kind, item)

    # -- state handlers -------------------------------------------------

    def _h_awaiting_solve(self) -> SessionEvent:
        if not self.log.events:
            self._emit_step(AWAITING_SOLVE)
        terminal = self._call_agent(
            "solve", None, lambda: self.agents.solve(self.problem.text, self.opts)
        )
        if terminal is not None:
            return terminal
        return self._emit_step(ANALYZING_STRUCTURE)

    def _h_analyzing(self) -> SessionEvent:
        if self.derivation_error is not None:
            return self._negative(
                ANALYZING_STRUCTURE,
                f"solution rejected at {self.derivation_error['stage']}: "
                f"{self.derivation_error['message']}",
                infrastructure=True,
            )
        if self.violations:
            summary = "; ".join(v["message"] for v in self.violations[:5])
            return self._negative(
                ANALYZING_STRUCTURE, f"structure violations: {summary}", infrastructure=True
            )
        if self.facts:
            return self._emit_step(FORMALIZING_FACTS, 0)
        return self._emit_step(FORMALIZING_LEMMAS, 0)

    def _h_formalizing_facts(self) -> SessionEvent:
        k = self.cursor or 0
        if k >= len(self.facts):
            return self._emit_step(PROVING_FACTS, 0)
        item = self.facts[k]
        if item.form is None:
            terminal = self._call_agent(
                "formalize",
                {"kind": "fact", "key": item.key},
                lambda: self.agents.formalize(
                    item.statement,
                    self._fact_context_statements(item),
                    self._variables(),
                    self.opts,
                ),
            )
            return terminal if terminal is not None else self.log.events[-1]
        if item.form.status == UNCHECKED:
            terminal = self._compile_statement(item)
            if terminal is not None:
                return terminal
            if item.form.status == COMPILE_ERROR:
                return self._handle_compile_failure(item)
            return self._emit_step(FORMALIZING_FACTS, k + 1)
        return self._emit_step(FORMALIZING_FACTS, k + 1)

    def _h_proving_facts(self) -> SessionEvent:
        k = self.cursor or 0
        if k >= len(self.facts):
            return self._emit_step(FORMALIZING_LEMMAS, 0)
        item = self.facts[k]
        if item.skipped or item.established:
            return self._emit_step(PROVING_FACTS, k + 1)
        if item.form.status == UNCHECKED:  # user-provided translation
            terminal = self._compile_statement(item)
            if terminal is not None:
                return terminal
            if item.form.status == COMPILE_ERROR:
                return self._handle_compile_failure(item)
            return self.log.events[-1]
        if item.form.status in (COMPILE_OK, PROOF_FAILED):
            return self._prove_item(item, CTX_FACT_PROOF_FAILURE, [])
        return self._emit_step(PROVING_FACTS, k + 1)

    def _h_formalizing_lemmas(self) -> SessionEvent:
        k = self.cursor or 0
        total = len(self.lemmas)
        if k > total:
            return self._emit_step(CHECKING_TRANSLATION, 0)
        if k == total:
            return self._formalize_goal()
        item = self.lemmas[k]
        index = int(item.key)
        if item.form is None:
            terminal = self._call_agent(
                "formalize",
                {"kind": "lemma", "key": item.key},
                lambda: self.agents.formalize(
                    item.statement,
                    self._lemma_premise_statements(index),
                    self._variables(),
                    self.opts,
                ),
            )
            return terminal if terminal is not None else self.log.events[-1]
        if item.form.status == UNCHECKED:
            terminal = self._compile_statement(item)
            if terminal is not None:
                return terminal
            if item.form.status == COMPILE_ERROR:
                return self._handle_compile_failure(item)
            return self._emit_step(FORMALIZING_LEMMAS, k + 1)
        return self._emit_step(FORMALIZING_LEMMAS, k + 1)

    def _formalize_goal(self) -> SessionEvent:
        item = self.goal_item
        assert item is not None
        if item.form is None:
            # no trusted formalization: the translator provides it, with
            # the problem givens as hypotheses
            terminal = self._call_agent(
                "formalize",
                {"kind": "goal", "key": "goal"},
                lambda: self.agents.formalize(
                    item.statement,
                    extract_givens(self.problem.text),
                    self._variables(),
                    self.opts,
                ),
            )
            return terminal if terminal is not None else self.log.events[-1]
        if item.form.status == UNCHECKED:
            terminal = self._compile_statement(item)
            if terminal is not None:
                return terminal
            if item.form.status == COMPILE_ERROR:
                return self._handle_compile_failure(item)
            return self.log.events[-1]
        # goal compiled: run the too-easy guard once, then move on
        if self.cfg.trivial_check_budget > 0 and not self._trivial_checked():
            return self._run_trivial_check(item)
        return self._emit_step(CHECKING_TRANSLATION, 0)

    def _trivial_checked(self) -> bool:
        return any(
            e.kind == COMPILE_CHECKED and e.data.get("purpose") == "trivial"
            for e in self.log.events
        )

    def _run_trivial_check(self, item: WorkItem) -> SessionEvent:
        try:
            closed = trivial_check(
                self.backend,
                item.form,
                automation_budget=self.cfg.trivial_check_budget,
                tactic=self.cfg.backend.trivial_tactic,
                import_header=self.cfg.backend.import_header,
            )
        except BackendUnavailable as exc:
            return self._negative(self.state, f"backend unavailable: {exc}", infrastructure=True)
        return self._emit(
            COMPILE_CHECKED,
            {
                "purpose": "trivial",
                "target": {"kind": "goal", "key": "goal"},
                "status": "Ok" if closed else "Error",
                "diagnostics": [],
                "code": item.form.code,
                "elapsed": 0.0,
            },
        )

    def _h_checking_translation(self) -> SessionEvent:
        k = self.cursor or 0
        items = self.lemmas + [self.goal_item]
        if k >= len(items):
            return self._emit_step(PROVING_LEMMAS, 0)
        item = items[k]
        if item.form.status == UNCHECKED:  # replaced during a decision
            terminal = self._compile_statement(item)
            if terminal is not None:
                return terminal
            if item.form.status == COMPILE_ERROR:
                return self._handle_compile_failure(item)
            return self.log.events[-1]
        if item.kind == "lemma":
            index = int(item.key)
            texts = [s.text for s in self._lemma_premise_statements(index)] + [item.statement.text]
        else:
            texts = [item.statement.text]
        issues = translation_quality_issues(
            texts,
            item.form.code,
            declared_vars=self._variables(),
            check_variables=self.intro_variables,
            markers=self.cfg.backend.incomplete_markers,
        )
        if issues:
            if self.mode == MODE_AUTOMATIC:
                return self._negative(
                    CHECKING_TRANSLATION,
                    f"translation quality check failed for {item.name}: " + "; ".join(issues),
                    infrastructure=True,
                )
            return self._request_decision(CTX_QUALITY_FAILURE, item, extra={"issues": issues})
        return self._emit_step(CHECKING_TRANSLATION, k + 1)

    def _h_proving_lemmas(self) -> SessionEvent:
        k = self.cursor or 0
        if k >= len(self.lemmas):
            return self._emit_step(LINKING)
        item = self.lemmas[k]
        if item.skipped or item.established:
            return self._emit_step(PROVING_LEMMAS, k + 1)
        if item.form.status == UNCHECKED:
            terminal = self._compile_statement(item)
            if terminal is not None:
                return terminal
            if item.form.status == COMPILE_ERROR:
                return self._handle_compile_failure(item)
            return self.log.events[-1]
        if item.form.status in (COMPILE_OK, PROOF_FAILED):
            return self._prove_item(
                item, CTX_LEMMA_PROOF_FAILURE, self._lemma_hypothesis_forms(int(item.key))
            )
        return self._emit_step(PROVING_LEMMAS, k + 1)

    # -- linking ---------------------------------------------------------

    def _linking_graph(self):
        assert self.solution is not None
        sol = self.solution
        if self.bridge_lemma is not None and self.bridge_item is not None and self.bridge_item.established:
            sol = sol.with_lemmas(sol.lemmas + (self.bridge_lemma,))
        import warnings as _warnings

        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            return build_hypergraph(sol)

    def _h_linking(self) -> SessionEvent:
        # bridge item in flight: push it through formalize/compile/prove
        if self.bridge_item is not None and not self.bridge_item.established and not self.bridge_item.skipped:
            return self._advance_bridge()

        graph = self._linking_graph()
        link = check_reachability(
            graph,
            established_sources=self._established_sources(graph),
            active_lemmas=self._active_lemma_indices(),
        )
        self.link_info = link.to_dict()

        if not link.reachable:
            bridge = None
            if self.bridge_item is None:  # repair not yet attempted
                goal_form = self.goal_item.form if self.goal_item else None
                bridge = final_gap_repair(graph, goal_form, link)
            if bridge is not None:
                self._create_bridge_item()
                return self._advance_bridge()
            missing_texts = [
                graph.nodes[sid].statement.text for sid in sorted(link.missing) if sid in graph.nodes
            ]
            return self._negative(
                LINKING,
                "goal not derivable; missing: " + "; ".join(missing_texts or sorted(link.missing)),
                infrastructure=False,
            )

        return self._compose_and_finish(graph, link)

    def _advance_bridge(self) -> SessionEvent:
        item = self.bridge_item
        assert item is not None
        if self.bridge_lemma is None:
            # repair window closed (e.g. bridge premises changed): refuse
            item.skipped = True
            return self._negative(LINKING, "final-gap repair not applicable", infrastructure=False)
        if item.form is None:
            premises = [p.statement for p in self.bridge_lemma.premises]
            terminal = self._call_agent(
                "formalize",
                {"kind": "bridge", "key": "bridge"},
                lambda: self.agents.formalize(item.statement, premises, self._variables(), self.opts),
            )
            return terminal if terminal is not None else self.log.events[-1]
        if item.form.status == UNCHECKED:
            terminal = self._compile_statement(item)
            if terminal is not None:
                return terminal
            if item.form.status == COMPILE_ERROR:
                return self._handle_compile_failure(item)
            return self.log.events[-1]
        if item.form.status in (COMPILE_OK, PROOF_FAILED):
            hyps = [f for f in (it.form for it in self.lemmas if it.established) if f is not None]
            hyps += [f for f in (it.form for it in self.facts if it.established) if f is not None]
            return self._prove_item(item, CTX_LEMMA_PROOF_FAILURE, hyps)
        return self.log.events[-1]

    def _compose_and_finish(self, graph, link) -> SessionEvent:
        lemma_forms = {int(item.key): item.form for item in self.lemmas if item.form is not None}
        if self.bridge_lemma is not None and self.bridge_item is not None and self.bridge_item.form is not None:
            lemma_forms[self.bridge_lemma.index] = self.bridge_item.form
        fact_forms = [item.form for item in self.facts if item.established]
        goal_form = self.goal_item.form
        try:
            unit, result = compose_final_proof(
                graph,
                lemma_forms,
                goal_form,
                self.backend,
                link,
                fact_forms=fact_forms,
                import_header=self.cfg.backend.import_header,
                min_chain_depth=self.cfg.min_chain_depth,
                timeout=self.cfg.backend.compile_timeout,
            )
        except CompositionCompileError as exc:
            self._emit(
                COMPILE_CHECKED,
                {
                    "purpose": "composed",
                    "target": {"kind": "goal", "key": "goal"},
                    "status": "Error",
                    "diagnostics": [d.to_dict() for d in exc.diagnostics],
                    "code": exc.unit,
                    "elapsed": 0.0,
                },
            )
            return self._negative(
                LINKING, f"final proof composition failed to compile: {exc}", infrastructure=True
            )
        except BackendUnavailable as exc:
            return self._negative(LINKING, f"backend unavailable: {exc}", infrastructure=True)
        self._emit(
            COMPILE_CHECKED,
            {
                "purpose": "composed",
                "target": {"kind": "goal", "key": "goal"},
                "status": result.status,
                "diagnostics": [d.to_dict() for d in result.diagnostics],
                "code": unit,
                "elapsed": result.elapsed,
            },
        )
        kind = VERIFIED_TRIVIAL if self.trivial else VERIFIED
        return self._emit_verdict(kind)

    # ------------------------------------------------------------------
    # decisions
    # ------------------------------------------------------------------

    def apply_decision(self, decision: Decision) -> SessionEvent:
        if self.state == FINISHED:
            raise SessionFinished(self.session_id)
        if self.state != AWAITING_DECISION or self.context is None:
            raise IllegalDecision(f"session is in {self.state}, not awaiting a decision")
        legal = self.context.get("legal", ())
        if decision.type not in ALL_DECISIONS:
            raise IllegalDecision(f"unknown decision type {decision.type!r}")
        if decision.type not in legal:
            raise IllegalDecision(
                f"{decision.type} is not legal here; legal: {', '.join(legal)}"
            )
        if decision.type in (PROVIDE_TRANSLATION, PROVIDE_FORMALIZATION) and not (decision.code or "").strip():
            raise IllegalDecision(f"{decision.type} requires replacement code")
        failing_state = self.context["resume"]["state"]
        event = self._emit(DECISION_APPLIED, {"type": decision.type, "code": decision.code})
        if decision.type == MARK_FALSE_AND_STOP:
            return self._emit_verdict(
                REFUTED, failing_step=failing_state, reason="statement marked false by the user"
            )
        if decision.type == STOP_NEGATIVE:
            return self._emit_verdict(
                REFUTED, failing_step=failing_state, reason="stopped by the user"
            )
        return event


def _diag_summary(diagnostics) -> str:
    msgs = [d.message for d in diagnostics if d.severity == "error"]
    return "; ".join(msgs[:3]) if msgs else "no diagnostics"


def _dict_to_diag(d: dict[str, Any]):
    from ..backend import Diagnostic

    return Diagnostic.from_dict(d)
