from __future__ import annotations

import json

import pytest

from lemmaflow.pipeline import (
    AWAITING_DECISION,
    CTX_COMPILE_FAILURE,
    CTX_FACT_PROOF_FAILURE,
    Decision,
    DecisionPending,
    EventLog,
    FINISHED,
    IllegalDecision,
    LEGAL_DECISIONS,
    MODE_AUTOMATIC,
    MODE_INTERACTIVE,
    PipelineConfig,
    SessionFinished,
    VerificationSession,
    build_report,
    render_text,
    run_automatic,
)
from lemmaflow.pipeline.config import AgentsConfig, BackendConfig
from lemmaflow.pipeline.session import (
    ACCEPT_WITHOUT_PROOF,
    CONTINUE_WITHOUT_FACT,
    MARK_FALSE_AND_STOP,
    PROVIDE_FORMALIZATION,
    PROVIDE_TRANSLATION,
    RETRY_PROVER,
    STOP_NEGATIVE,
)
from lemmaflow.solution import ProblemStatement

import pipeline_fixtures as fx


def make_session(problem, cfg, mode=MODE_AUTOMATIC, intro=True, clock=None, log=None):
    clock = clock or fx.fake_clock()
    return VerificationSession(
        session_id="s-test",
        problem=problem,
        cfg=cfg,
        mode=mode,
        intro_variables=intro,
        agents=cfg.build_agent_client(clock=clock),
        backend=cfg.build_backend(),
        log=log if log is not None else EventLog(clock=clock),
    )


def drive_to_decision(session):
    while session.state != AWAITING_DECISION and not session.finished:
        session.advance()
    assert session.state == AWAITING_DECISION, session.verdict
    return session.context


# ---------------------------------------------------------------------------
# automatic mode
# ---------------------------------------------------------------------------


def test_two_lemma_fixture_verifies_with_order():
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config(), clock=fx.fake_clock())
    assert report.verdict["kind"] == "Verified"
    assert report.derivation_order == [1, 2]
    assert report.composed_proof and report.composed_proof["status"] == "Ok"
    assert report.assumed_facts == []


def test_bad_fact_translation_refutes_at_formalizing_facts():
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, fx.bad_fact_config(), clock=fx.fake_clock())
    assert report.verdict["kind"] == "Refuted"
    assert report.verdict["failing_step"] == "FormalizingFacts"
    assert "BROKEN_FACT_CODE" in report.verdict["reason"]


def test_trivial_goal_downgrades_to_verified_trivial():
    report = run_automatic(fx.TRIVIAL_PROBLEM, fx.trivial_config(), clock=fx.fake_clock())
    assert report.verdict["kind"] == "VerifiedTrivial"
    assert report.composed_proof["status"] == "Ok"


def test_fact_proof_failure_refutes_after_retry_budget():
    cfg = fx.failing_fact_proof_config(mode_retries=1, proof_entries=["```\nby sorry\n```", "```\nby sorry\n```"])
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, cfg, clock=fx.fake_clock())
    assert report.verdict["kind"] == "Refuted"
    assert report.verdict["failing_step"] == "ProvingFacts"
    fact = report.facts[0]
    assert fact["attempts"] == 2  # initial + one retry


def test_automatic_retry_can_recover():
    cfg = fx.failing_fact_proof_config(mode_retries=2)  # fails once, then by omega
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, cfg, clock=fx.fake_clock())
    assert report.verdict["kind"] == "Verified"
    assert report.facts[0]["attempts"] == 2


def test_agent_transport_failure_is_inconclusive():
    cfg = PipelineConfig(
        agents=AgentsConfig(transport="mock", inline_script={"solver": [{"error": "transport"}]}),
        backend=BackendConfig(kind="stub"),
    )
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, cfg, clock=fx.fake_clock())
    assert report.verdict["kind"] == "Inconclusive"
    assert report.verdict["failing_step"] == "AwaitingSolve"


def test_parse_failure_is_inconclusive_not_refuted():
    cfg = PipelineConfig(
        agents=AgentsConfig(transport="mock", inline_script={"solver": ["no blocks here at all"]}),
        backend=BackendConfig(kind="stub"),
    )
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, cfg, clock=fx.fake_clock())
    assert report.verdict["kind"] == "Inconclusive"
    assert report.verdict["failing_step"] == "AnalyzingStructure"


def test_quality_check_failure_is_inconclusive():
    script = dict(fx.TWO_LEMMA_SCRIPT)
    script["translator"] = [
        "```\n(3 : ℤ) + 1 = 4\n```",
        "```\n∀ x : ℤ, 3*x = 9 → x = 3\n```",
        "```\n∀ x : ℤ, x = 3 → True\n```",  # lemma 2 loses literals 1 and 4
        "```\n∀ x : ℤ, 3*x = 9 → x + 1 = 4\n```",
    ]
    cfg = PipelineConfig(
        agents=AgentsConfig(transport="mock", inline_script=script),
        backend=BackendConfig(kind="stub", inline_script=list(fx.NON_TRIVIAL_STUB)),
    )
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, cfg, clock=fx.fake_clock())
    assert report.verdict["kind"] == "Inconclusive"
    assert report.verdict["failing_step"] == "CheckingTranslation"


def test_trusted_goal_replaces_translator_output():
    prob = ProblemStatement(
        id=fx.TWO_LEMMA_PROBLEM.id,
        text=fx.TWO_LEMMA_PROBLEM.text,
        trusted_goal="∀ x : ℤ, 3*x = 9 → x + 1 = 4",
        label=True,
    )
    script = dict(fx.TWO_LEMMA_SCRIPT)
    script["translator"] = script["translator"][:3]  # goal translation never requested
    cfg = PipelineConfig(
        agents=AgentsConfig(transport="mock", inline_script=script),
        backend=BackendConfig(kind="stub", inline_script=list(fx.NON_TRIVIAL_STUB)),
        intro_variables="on",
    )
    report = run_automatic(prob, cfg, clock=fx.fake_clock())
    assert report.verdict["kind"] == "Verified"
    assert report.goal["formalization"]["code"] == "∀ x : ℤ, 3*x = 9 → x + 1 = 4"
    goal_translates = [
        t for t in report.transcripts if t["purpose"] == "formalize" and t["target"]["kind"] == "goal"
    ]
    assert goal_translates == []


def test_final_gap_repair_bridges_and_verifies():
    report = run_automatic(fx.GAP_PROBLEM, fx.gap_config(), clock=fx.fake_clock())
    assert report.verdict["kind"] == "Verified"
    assert report.bridge is not None
    assert report.bridge["formalization"]["status"] == "ProvedOk"
    assert report.derivation_order == [1, 2]


def test_lemma_prover_context_is_prior_conclusions_plus_cited_facts():
    cfg = fx.two_lemma_config()
    clock = fx.fake_clock()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, clock=clock)
    session.run_to_completion()
    prove_events = [
        e for e in session.log.events
        if e.kind == "AgentCalled" and e.data["purpose"] == "prove" and e.data["target"]["kind"] == "lemma"
    ]
    lemma2_prompt = next(e.data["prompt"] for e in prove_events if e.data["target"]["key"] == "2")
    fact_code = "(3 : ℤ) + 1 = 4"
    lemma1_code = "∀ x : ℤ, 3*x = 9 → x = 3"
    assert fact_code in lemma2_prompt
    assert lemma1_code in lemma2_prompt
    lemma1_prompt = next(e.data["prompt"] for e in prove_events if e.data["target"]["key"] == "1")
    assert fact_code not in lemma1_prompt  # lemma 1 cites no fact
    assert "lemma_1" not in lemma1_prompt


def test_automatic_mode_never_requests_decisions():
    configs = [
        (fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config()),
        (fx.TWO_LEMMA_PROBLEM, fx.bad_fact_config()),
        (fx.TRIVIAL_PROBLEM, fx.trivial_config()),
        (fx.TWO_LEMMA_PROBLEM, fx.failing_fact_proof_config()),
        (fx.GAP_PROBLEM, fx.gap_config()),
    ]
    for prob, cfg in configs:
        session = make_session(prob, cfg, mode=MODE_AUTOMATIC)
        session.run_to_completion()
        kinds = {e.kind for e in session.log.events}
        assert "DecisionRequested" not in kinds


def test_backend_unavailable_is_inconclusive_never_refuted(monkeypatch):
    cfg = fx.two_lemma_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg)

    from lemmaflow.backend import BackendUnavailable

    def broken(code, timeout=None):
        raise BackendUnavailable("toolchain missing")

    monkeypatch.setattr(session.backend, "check_compile", broken)
    session.run_to_completion()
    assert session.verdict.kind == "Inconclusive"


# ---------------------------------------------------------------------------
# determinism / event sourcing
# ---------------------------------------------------------------------------


def test_reports_byte_identical_across_runs():
    blobs = set()
    for _ in range(3):
        report = run_automatic(fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config(), clock=fx.fake_clock())
        blobs.add(report.canonical_json(redact_timings=True))
    assert len(blobs) == 1


def test_event_replay_reconstructs_state_and_report(tmp_path):
    cfg = fx.two_lemma_config()
    clock = fx.fake_clock()
    log = EventLog(path=tmp_path / "events.jsonl", clock=clock)
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, clock=clock, log=log)
    session.run_to_completion()
    original = build_report(session).canonical_json(redact_timings=True)

    reloaded_log = EventLog.load(tmp_path / "events.jsonl")
    replayed = VerificationSession(
        session_id="s-test",
        problem=fx.TWO_LEMMA_PROBLEM,
        cfg=cfg,
        mode=MODE_AUTOMATIC,
        intro_variables=True,
        agents=cfg.build_agent_client(),
        backend=cfg.build_backend(),
        log=reloaded_log,
    )
    assert replayed.state == FINISHED
    assert replayed.verdict == session.verdict
    assert build_report(replayed).canonical_json(redact_timings=True) == original


def test_event_seq_strictly_increasing():
    session = make_session(fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config())
    session.run_to_completion()
    seqs = [e.seq for e in session.log.events]
    assert seqs == list(range(1, len(seqs) + 1))


def test_intro_variables_both_takes_more_favourable_pass():
    # the on-pass solver output fails to parse; the off pass verifies
    from lemmaflow.agents import AgentRole, PromptOptions, render_prompt
    from lemmaflow.agents.client import prompt_hash

    on_prompt = render_prompt(
        AgentRole.SOLVER, {"problem_text": fx.TWO_LEMMA_PROBLEM.text}, PromptOptions(True)
    )
    script = dict(fx.TWO_LEMMA_SCRIPT)
    script[prompt_hash(on_prompt)] = ["free-form prose with no lemma blocks"]
    cfg = PipelineConfig(
        agents=AgentsConfig(transport="mock", inline_script=script),
        backend=BackendConfig(kind="stub", inline_script=list(fx.NON_TRIVIAL_STUB)),
        intro_variables="both",
    )
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, cfg, clock=fx.fake_clock())
    assert report.sweep == {"on": "Inconclusive", "off": "Verified"}
    assert report.verdict["kind"] == "Verified"
    assert report.options["introduce_variables"] is False


def test_intro_variables_both_tie_breaks_to_on_pass():
    script = {
        "solver": [fx.TWO_LEMMA_SOLUTION, fx.TWO_LEMMA_SOLUTION],
        "translator": fx.TWO_LEMMA_SCRIPT["translator"] * 2,
        "prover": fx.TWO_LEMMA_SCRIPT["prover"] * 2,
    }
    cfg = PipelineConfig(
        agents=AgentsConfig(transport="mock", inline_script=script),
        backend=BackendConfig(kind="stub", inline_script=list(fx.NON_TRIVIAL_STUB)),
        intro_variables="both",
    )
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, cfg, clock=fx.fake_clock())
    assert report.verdict["kind"] == "Verified"
    assert report.options["introduce_variables"] is True


# ---------------------------------------------------------------------------
# interactive decisions
# ---------------------------------------------------------------------------


def test_fact_proof_failure_offers_five_options():
    cfg = fx.failing_fact_proof_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    context = drive_to_decision(session)
    assert context["kind"] == CTX_FACT_PROOF_FAILURE
    assert sorted(context["legal"]) == sorted(LEGAL_DECISIONS[CTX_FACT_PROOF_FAILURE])
    assert len(context["legal"]) == 5


def test_compile_failure_offers_two_options():
    cfg = fx.bad_fact_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    context = drive_to_decision(session)
    assert context["kind"] == CTX_COMPILE_FAILURE
    assert sorted(context["legal"]) == sorted(["ProvideFormalization", "StopNegative"])


def test_retry_prover_succeeds_on_second_attempt():
    cfg = fx.failing_fact_proof_config()  # sorry then omega
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    session.apply_decision(Decision(type=RETRY_PROVER))
    session.run_until_pause()
    assert session.finished
    assert session.verdict.kind == "Verified"
    assert session.facts[0].form.status == "ProvedOk"
    assert session.facts[0].attempts == 2


def test_accept_without_proof_reaches_verified_with_assumed_facts():
    cfg = fx.failing_fact_proof_config(proof_entries=["```\nby sorry\n```"])
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    session.apply_decision(Decision(type=ACCEPT_WITHOUT_PROOF))
    session.run_until_pause()
    assert session.finished
    assert session.verdict.kind == "Verified"
    assert session.verdict.assumed_facts == (session.facts[0].key,)
    report = build_report(session)
    assert report.assumed_facts == [session.facts[0].key]
    assert "sorry" in report.composed_proof["code"]
    assert "ASSUMED WITHOUT PROOF" in render_text(report)


def test_continue_without_fact_blocks_linking():
    cfg = fx.failing_fact_proof_config(proof_entries=["```\nby sorry\n```"])
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    session.apply_decision(Decision(type=CONTINUE_WITHOUT_FACT))
    session.run_until_pause()
    # lemma 2 proof still succeeds by script, but the dropped fact is a
    # missing source at linking
    assert session.finished
    assert session.verdict.kind == "Refuted"
    assert session.verdict.failing_step == "Linking"


def test_mark_false_and_stop_refutes_immediately():
    cfg = fx.failing_fact_proof_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    session.apply_decision(Decision(type=MARK_FALSE_AND_STOP))
    assert session.finished
    assert session.verdict.kind == "Refuted"
    assert session.verdict.failing_step == "ProvingFacts"
    assert "false" in session.verdict.reason


def test_provide_translation_restarts_prover_on_new_code():
    cfg = fx.failing_fact_proof_config(proof_entries=["```\nby sorry\n```"])
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    session.apply_decision(Decision(type=PROVIDE_TRANSLATION, code="(3 : ℤ) + 1 = 2 + 2"))
    session.run_until_pause()
    assert session.finished
    assert session.facts[0].form.code == "(3 : ℤ) + 1 = 2 + 2"
    assert session.verdict.kind == "Verified"


def test_provide_formalization_fixes_compile_failure():
    cfg = fx.bad_fact_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    session.apply_decision(Decision(type=PROVIDE_FORMALIZATION, code="(3 : ℤ) + 1 = 4"))
    session.run_until_pause()
    assert session.finished
    assert session.verdict.kind == "Verified"


def test_stop_negative_refutes():
    cfg = fx.bad_fact_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    session.apply_decision(Decision(type=STOP_NEGATIVE))
    assert session.finished
    assert session.verdict.kind == "Refuted"


def test_illegal_decision_leaves_state_unchanged():
    cfg = fx.bad_fact_config()  # compile-failure context: 2 legal options
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    seq_before = session.log.last_seq
    with pytest.raises(IllegalDecision):
        session.apply_decision(Decision(type=RETRY_PROVER))
    assert session.state == AWAITING_DECISION
    assert session.log.last_seq == seq_before


def test_decision_on_finished_session_raises():
    session = make_session(fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config())
    session.run_to_completion()
    with pytest.raises(SessionFinished):
        session.apply_decision(Decision(type=STOP_NEGATIVE))


def test_advance_while_awaiting_decision_raises():
    cfg = fx.failing_fact_proof_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    with pytest.raises(DecisionPending):
        session.advance()


def test_provide_translation_without_code_is_illegal():
    cfg = fx.failing_fact_proof_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    with pytest.raises(IllegalDecision):
        session.apply_decision(Decision(type=PROVIDE_TRANSLATION, code="  "))


def test_quality_failure_fixed_by_provided_formalization():
    cfg = fx.quality_failure_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    context = drive_to_decision(session)
    assert context["kind"] == "quality_failure"
    assert any("numeric literal" in issue for issue in context["issues"])
    session.apply_decision(
        Decision(
            type=PROVIDE_FORMALIZATION,
            code="∀ x : ℤ, x = 3 → (3 : ℤ) + 1 = 4 → x + 1 = 4",
        )
    )
    session.run_until_pause()
    assert session.finished
    assert session.verdict.kind == "Verified"


def test_bad_provided_formalization_asks_again():
    cfg = fx.quality_failure_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    drive_to_decision(session)
    # replacement passes compile (stub default-ok) but still loses literals
    session.apply_decision(Decision(type=PROVIDE_FORMALIZATION, code="∀ x : ℤ, True"))
    session.run_until_pause()
    assert session.state == AWAITING_DECISION
    assert session.context["kind"] == "quality_failure"


def test_skipped_lemma_leaves_goal_unreachable():
    cfg = fx.failing_lemma_proof_config()
    session = make_session(fx.TWO_LEMMA_PROBLEM, cfg, mode=MODE_INTERACTIVE)
    context = drive_to_decision(session)
    assert context["kind"] == "lemma_proof_failure"
    session.apply_decision(Decision(type=CONTINUE_WITHOUT_FACT))
    session.run_until_pause()
    assert session.finished
    assert session.verdict.kind == "Refuted"
    assert session.verdict.failing_step == "Linking"


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def test_verified_report_contains_composed_section():
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config(), clock=fx.fake_clock())
    assert report.composed_proof["final"] is True
    assert "theorem lemma_1" in report.composed_proof["code"]
    text = render_text(report)
    assert "composed proof" in text
    assert "Verified" in text


def test_refuted_report_stops_at_failing_step_with_diagnostics():
    report = run_automatic(fx.TWO_LEMMA_PROBLEM, fx.bad_fact_config(), clock=fx.fake_clock())
    states = [s["state"] for s in report.steps]
    assert states[-1] == "FormalizingFacts"
    assert "ProvingLemmas" not in states
    fact = report.facts[0]
    assert fact["formalization"]["status"] == "CompileError"
    assert any("BROKEN_FACT_CODE" in d["message"] for d in fact["formalization"]["diagnostics"])
    assert report.composed_proof is None


def test_report_round_trips_through_json():
    from lemmaflow.pipeline import Report

    report = run_automatic(fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config(), clock=fx.fake_clock())
    blob = report.canonical_json()
    again = Report.from_dict(json.loads(blob))
    assert again.canonical_json() == blob
