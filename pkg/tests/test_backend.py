from __future__ import annotations

import shutil

import pytest

from lemmaflow.backend import (
    ACCEPTED_WITHOUT_PROOF,
    COMPILE_OK,
    PROOF_FAILED,
    PROVED_OK,
    CompileResult,
    Diagnostic,
    Formalization,
    LeanBackend,
    StubBackend,
    assemble_unit,
    attempt_proof,
    check_statement,
    contains_incomplete_marker,
    parse_compiler_output,
    proposition_of,
    render_theorem,
    trivial_check,
)
from lemmaflow.backend.stub import code_hash


def form(name="goal_t", code="1 = 1", status=COMPILE_OK, proof=None):
    return Formalization(name=name, source_sid="s" * 16, code=code, status=status, proof_code=proof)


# ---------------------------------------------------------------------------
# incomplete markers
# ---------------------------------------------------------------------------


def test_marker_in_proof_body():
    assert contains_incomplete_marker("theorem t : 1 = 1 := by sorry")


def test_marker_inside_line_comment_is_ignored():
    assert not contains_incomplete_marker("theorem t : 1 = 1 := rfl -- sorry about that")


def test_marker_inside_block_comment_is_ignored():
    assert not contains_incomplete_marker("/- sorry /- nested sorry -/ -/ theorem t : 1 = 1 := rfl")


def test_marker_inside_string_is_ignored():
    assert not contains_incomplete_marker('def msg := "sorry not sorry"')


def test_marker_must_be_a_whole_token():
    assert not contains_incomplete_marker("def sorrynot := 1\ndef unsorry := 2")


def test_admit_counts_as_marker():
    assert contains_incomplete_marker("theorem t : 1 = 1 := by admit")


def test_complete_proof_has_no_marker():
    assert not contains_incomplete_marker("theorem t : 1 = 1 := rfl")


# ---------------------------------------------------------------------------
# code shaping
# ---------------------------------------------------------------------------


def test_proposition_of_bare_proposition_unchanged():
    assert proposition_of("∀ x : ℤ, 3*x = 9 → x = 3") == "∀ x : ℤ, 3*x = 9 → x = 3"


def test_proposition_of_strips_header_and_placeholder_proof():
    code = "theorem foo : 3 * 3 = 9 := by sorry"
    assert proposition_of(code) == "3 * 3 = 9"


def test_proposition_of_lifts_binders():
    code = "theorem foo (x : ℤ) (h : 3*x = 9) : x = 3 := sorry"
    assert proposition_of(code) == "∀ (x : ℤ) (h : 3*x = 9), x = 3"


def test_render_theorem_strips_leading_assign():
    assert render_theorem("t", "1 = 1", ":= rfl") == "theorem t : 1 = 1 := rfl"


# ---------------------------------------------------------------------------
# stub backend
# ---------------------------------------------------------------------------


def test_stub_exact_hash_match():
    code = "theorem a : 1 = 1 := rfl"
    stub = StubBackend([{"code_sha256": code_hash(code), "status": "error"}])
    assert not stub.check_compile(code).ok
    assert stub.check_compile("something else").ok  # default ok


def test_stub_substring_match_with_named_diagnostic():
    stub = StubBackend(
        [
            {
                "match_substring": "undefinedIdent",
                "status": "error",
                "diagnostics": [
                    {"severity": "error", "line": 3, "column": 7, "message": "unknown identifier 'undefinedIdent'"}
                ],
            }
        ]
    )
    res = stub.check_compile("theorem t : undefinedIdent = 1 := rfl")
    assert not res.ok
    assert "undefinedIdent" in res.diagnostics[0].message
    assert (res.diagnostics[0].line, res.diagnostics[0].column) == (3, 7)


def test_stub_sleep_script_times_out():
    stub = StubBackend([{"match_substring": "slow", "status": "ok", "sleep": 120}], timeout=1.0)
    res = stub.check_compile("theorem slow : 1 = 1 := rfl")
    assert not res.ok
    assert "Timeout" in res.diagnostics[0].message


def test_stub_default_error_mode():
    stub = StubBackend(default_status="error")
    assert not stub.check_compile("anything").ok


def test_stub_is_deterministic_over_repeats():
    stub = StubBackend([{"match_substring": "bad", "status": "error"}])
    ok_code, bad_code = "theorem good : 1 = 1 := rfl", "theorem bad : 2 = 1 := rfl"
    statuses = {(stub.check_compile(ok_code).status, stub.check_compile(bad_code).status) for _ in range(20)}
    assert statuses == {("Ok", "Error")}


def test_compile_result_invariant_error_diag_forces_error_status():
    res = CompileResult(status="Ok", diagnostics=(Diagnostic("error", 1, 1, "boom"),))
    assert res.status == "Error"


# ---------------------------------------------------------------------------
# statement check / proof attempts
# ---------------------------------------------------------------------------


def test_check_statement_sets_compile_status():
    stub = StubBackend()
    f, res = check_statement(stub, form(status="Unchecked"))
    assert res.ok and f.status == COMPILE_OK


def test_attempt_proof_success_with_hypothesis():
    stub = StubBackend()
    hyp = form(name="lemma_1", code="A", status=PROVED_OK, proof="by rfl")
    goal = form(name="goal_t", code="B")
    proved, res = attempt_proof(stub, goal, [hyp], "by exact lemma_1")
    assert proved.status == PROVED_OK
    assert proved.proof_code == "by exact lemma_1"
    unit = stub.calls[-1]
    assert "theorem lemma_1 : A := by rfl" in unit
    assert "theorem goal_t : B := by exact lemma_1" in unit


def test_attempt_proof_marker_in_output_fails_even_when_compile_ok():
    stub = StubBackend()  # compiles everything fine
    proved, res = attempt_proof(stub, form(), [], "by sorry")
    assert res.ok
    assert proved.status == PROOF_FAILED
    assert any("marker" in d.message for d in proved.diagnostics)


def test_attempt_proof_compile_error_carries_diagnostics():
    stub = StubBackend(
        [{"match_substring": "ghostHyp", "status": "error",
          "diagnostics": [{"severity": "error", "line": 1, "column": 1, "message": "unknown identifier 'ghostHyp'"}]}]
    )
    proved, _ = attempt_proof(stub, form(), [], "by exact ghostHyp")
    assert proved.status == PROOF_FAILED
    assert "ghostHyp" in proved.diagnostics[0].message


def test_accepted_hypothesis_does_not_block_goal_proof():
    stub = StubBackend()
    accepted = form(name="fact_1", code="F", status=ACCEPTED_WITHOUT_PROOF)
    proved, _ = attempt_proof(stub, form(), [accepted], "by exact fact_1")
    assert proved.status == PROVED_OK
    unit = stub.calls[-1]
    assert contains_incomplete_marker(unit)  # the accepted segment carries it


def test_attempt_proof_never_proves_over_unaccepted_marker():
    stub = StubBackend()
    unproven_hyp = form(name="h", code="H", status=PROVED_OK, proof=None)  # no proof recorded
    proved, _ = attempt_proof(stub, form(), [unproven_hyp], "by exact h")
    assert proved.status == PROOF_FAILED


def test_assemble_unit_layout_and_header():
    hyp = form(name="lemma_1", code="A", status=PROVED_OK, proof="by rfl")
    unit, violation = assemble_unit("import Mathlib", [hyp], form(name="main", code="B"), "by exact lemma_1")
    assert unit.startswith("import Mathlib\n\n")
    assert unit.index("lemma_1") < unit.index("theorem main")
    assert not violation


# ---------------------------------------------------------------------------
# trivial check
# ---------------------------------------------------------------------------


def test_trivial_check_true_when_automation_closes_goal():
    stub = StubBackend()
    assert trivial_check(stub, form(code="gcd 12 8 = 4"), automation_budget=10.0)


def test_trivial_check_false_when_scripted_unprovable():
    stub = StubBackend([{"match_substring": "_auto", "status": "error"}])
    assert not trivial_check(stub, form(code="hard goal"), automation_budget=10.0)


def test_trivial_check_zero_budget_is_false_without_compiling():
    stub = StubBackend()
    assert not trivial_check(stub, form(), automation_budget=0)
    assert stub.calls == []


# ---------------------------------------------------------------------------
# compiler output parsing
# ---------------------------------------------------------------------------


def test_parse_compiler_output_shapes():
    output = (
        "Check.lean:3:10: error: unknown identifier 'foo'\n"
        "  possible fix: import something\n"
        "Check.lean:7:2: warning: unused variable\n"
        "some stray linker noise\n"
    )
    diags, tail = parse_compiler_output(output)
    assert [d.severity for d in diags] == ["error", "warning"]
    assert diags[0].line == 3 and diags[0].column == 10
    assert "possible fix" in diags[0].message
    assert tail == ["some stray linker noise"]


# ---------------------------------------------------------------------------
# backend conformance (stub always; real toolchain when present)
# ---------------------------------------------------------------------------


def _backends():
    yield StubBackend()
    if shutil.which("lean"):
        yield LeanBackend()


@pytest.mark.parametrize("backend", list(_backends()), ids=lambda b: b.name)
def test_conformance_contract(backend):
    code = "theorem conforms : 1 = 1 := rfl"
    first = backend.check_compile(code)
    assert isinstance(first, CompileResult)
    assert first.status in ("Ok", "Error")
    if first.status == "Ok":
        assert not any(d.severity == "error" for d in first.diagnostics)
    for _ in range(5):
        assert backend.check_compile(code).status == first.status
