"""Regenerate fixtures/recorded_session.json from the mock pipeline.

Run from the repository root:  python3 frontend/scripts/record_fixture.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

import pipeline_fixtures as fx  # noqa: E402
from lemmaflow.pipeline import (  # noqa: E402
    Decision,
    EventLog,
    MODE_AUTOMATIC,
    MODE_INTERACTIVE,
    VerificationSession,
    build_report,
)


def make_session(problem, cfg, mode):
    clock = fx.fake_clock()
    return VerificationSession(
        session_id="rec-0001",
        problem=problem,
        cfg=cfg,
        mode=mode,
        intro_variables=True,
        agents=cfg.build_agent_client(clock=clock),
        backend=cfg.build_backend(),
        log=EventLog(clock=clock),
    )


def main() -> None:
    verified = make_session(fx.TWO_LEMMA_PROBLEM, fx.two_lemma_config(), MODE_AUTOMATIC)
    verified.run_to_completion()
    report = build_report(verified)

    fact_failure = make_session(
        fx.TWO_LEMMA_PROBLEM, fx.failing_fact_proof_config(), MODE_INTERACTIVE
    )
    fact_failure.run_until_pause()
    fact_ctx = fact_failure.context
    fact_ctx_seq = fact_failure.log.last_seq

    compile_failure = make_session(fx.TWO_LEMMA_PROBLEM, fx.bad_fact_config(), MODE_INTERACTIVE)
    compile_failure.run_until_pause()
    compile_ctx = compile_failure.context
    compile_ctx_seq = compile_failure.log.last_seq

    assumed = make_session(
        fx.TWO_LEMMA_PROBLEM,
        fx.failing_fact_proof_config(proof_entries=["```\nby sorry\n```"]),
        MODE_INTERACTIVE,
    )
    assumed.run_until_pause()
    assumed.apply_decision(Decision(type="AcceptWithoutProof"))
    assumed.run_until_pause()
    assumed_report = build_report(assumed)

    fixture = {
        "summary": {
            "session_id": verified.session_id,
            "problem_id": verified.problem.id,
            "mode": verified.mode,
            "state": verified.state,
            "cursor": verified.cursor,
            "created_at": 0.0,
            "updated_at": verified.log.events[-1].ts,
            "verdict": verified.verdict.to_dict(),
        },
        "events": [e.to_dict() for e in verified.log.events],
        "report": json.loads(report.canonical_json()),
        "report_with_assumed": json.loads(assumed_report.canonical_json()),
        "contexts": {
            "fact_proof_failure": {"context": fact_ctx, "seq": fact_ctx_seq},
            "compile_failure": {"context": compile_ctx, "seq": compile_ctx_seq},
        },
    }
    out = ROOT / "frontend" / "fixtures" / "recorded_session.json"
    out.write_text(json.dumps(fixture, indent=2, ensure_ascii=False, sort_keys=True))
    print(f"wrote {out} ({len(fixture['events'])} events)")


if __name__ == "__main__":
    main()
