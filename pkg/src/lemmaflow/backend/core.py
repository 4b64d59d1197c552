"""Proof-assistant interface: compile checks, proof attempts, markers.

The backend is pluggable: a real toolchain subprocess driver and a
scriptable stub implement the same contract, so every pipeline test
runs hermetically and the real toolchain slots in via config.
"""

from __future__ import annotations

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Iterable, Sequence

# Formalization statuses
UNCHECKED = "Unchecked"
COMPILE_OK = "CompileOk"
COMPILE_ERROR = "CompileError"
PROVED_OK = "ProvedOk"
PROOF_FAILED = "ProofFailed"
ACCEPTED_WITHOUT_PROOF = "AcceptedWithoutProof"

ESTABLISHED_STATUSES = frozenset({PROVED_OK, ACCEPTED_WITHOUT_PROOF})

DEFAULT_MARKERS = ("sorry", "admit")


class BackendUnavailable(Exception):
    """The configured backend cannot run (missing toolchain, bad path)."""


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning" | "info"
    line: int
    column: int
    message: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "severity": self.severity,
            "line": self.line,
            "column": self.column,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Diagnostic":
        return cls(
            severity=d.get("severity", "error"),
            line=int(d.get("line", 0)),
            column=int(d.get("column", 0)),
            message=d.get("message", ""),
        )


@dataclass(frozen=True)
class CompileResult:
    status: str  # "Ok" | "Error"
    diagnostics: tuple[Diagnostic, ...] = ()
    elapsed: float = 0.0

    def __post_init__(self) -> None:
        # an Ok result can never carry error-severity diagnostics
        if self.status == "Ok" and any(d.severity == "error" for d in self.diagnostics):
            object.__setattr__(self, "status", "Error")

    @property
    def ok(self) -> bool:
        return self.status == "Ok"

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "elapsed": self.elapsed,
        }


@dataclass(frozen=True)
class Formalization:
    """One statement's formal-code unit and its verification status."""

    name: str
    source_sid: str
    code: str
    status: str = UNCHECKED
    diagnostics: tuple[Diagnostic, ...] = ()
    proof_code: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "source_sid": self.source_sid,
            "code": self.code,
            "status": self.status,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "proof_code": self.proof_code,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Formalization":
        return cls(
            name=d["name"],
            source_sid=d["source_sid"],
            code=d["code"],
            status=d.get("status", UNCHECKED),
            diagnostics=tuple(Diagnostic.from_dict(x) for x in d.get("diagnostics", [])),
            proof_code=d.get("proof_code"),
        )


class ProverBackend(ABC):
    """Compile checks against some proof assistant."""

    name = "abstract"

    @abstractmethod
    def check_compile(self, code: str, timeout: float | None = None) -> CompileResult: ...

    def describe(self) -> str:
        return self.name


# ---------------------------------------------------------------------------
# incomplete-proof markers
# ---------------------------------------------------------------------------


def strip_comments_and_strings(code: str) -> str:
    """Blank out line comments, nested block comments and string bodies."""
    out = list(code)
    i = 0
    n = len(code)
    while i < n:
        ch = code[i]
        if ch == "-" and code.startswith("--", i):
            j = code.find("\n", i)
            j = n if j < 0 else j
            for k in range(i, j):
                out[k] = " "
            i = j
        elif ch == "/" and code.startswith("/-", i):
            depth = 1
            j = i + 2
            while j < n and depth:
                if code.startswith("/-", j):
                    depth += 1
                    j += 2
                elif code.startswith("-/", j):
                    depth -= 1
                    j += 2
                else:
                    j += 1
            for k in range(i, min(j, n)):
                out[k] = " "
            i = j
        elif ch == '"':
            j = i + 1
            while j < n:
                if code[j] == "\\":
                    j += 2
                    continue
                if code[j] == '"':
                    j += 1
                    break
                j += 1
            for k in range(i + 1, min(j - 1, n)):
                out[k] = " "
            i = j
        else:
            i += 1
    return "".join(out)


def contains_incomplete_marker(code: str, markers: Sequence[str] = DEFAULT_MARKERS) -> bool:
    """True iff a marker token appears outside comments and strings."""
    scrubbed = strip_comments_and_strings(code)
    for marker in markers:
        if re.search(rf"(?<![A-Za-z0-9_']){re.escape(marker)}(?![A-Za-z0-9_'])", scrubbed):
            return True
    return False


# ---------------------------------------------------------------------------
# code shaping
# ---------------------------------------------------------------------------

_DECL_HEAD_RE = re.compile(r"^\s*(theorem|lemma|example)\b\s*", re.DOTALL)


def proposition_of(code: str) -> str:
    """Reduce translator output to a bare proposition when possible.

    ``theorem foo (x : Int) : P x := by sorry`` becomes
    ``∀ (x : Int), P x``; already-bare propositions pass through.
    Anything unrecognized is returned unchanged and left for the
    compiler to judge.
    """
    m = _DECL_HEAD_RE.match(code)
    if not m:
        return code.strip()
    rest = code[m.end():]
    # skip the declaration name, if any (binders start at a bracket)
    name_m = re.match(r"[A-Za-z_][A-Za-z0-9_.']*\s*", rest)
    if name_m:
        rest = rest[name_m.end():]
    # find the top-level ':' separating binders from the proposition
    depth = 0
    split_at = -1
    for i, ch in enumerate(rest):
        if ch in "([{⟨":
            depth += 1
        elif ch in ")]}⟩":
            depth -= 1
        elif ch == ":" and depth == 0:
            if rest.startswith(":=", i):
                break
            split_at = i
            break
    if split_at < 0:
        return code.strip()
    binders = rest[:split_at].strip()
    body = rest[split_at + 1 :].strip()
    # drop an attached (non-)proof
    assign = _top_level_assign(body)
    if assign >= 0:
        body = body[:assign].strip()
    if not body:
        return code.strip()
    if binders:
        return f"∀ {binders}, {body}"
    return body


def _top_level_assign(text: str) -> int:
    depth = 0
    for i in range(len(text) - 1):
        ch = text[i]
        if ch in "([{⟨":
            depth += 1
        elif ch in ")]}⟩":
            depth -= 1
        elif depth == 0 and text.startswith(":=", i):
            return i
    return -1


def render_theorem(name: str, proposition: str, proof: str) -> str:
    proof_text = proof.strip()
    if proof_text.startswith(":="):
        proof_text = proof_text[2:].strip()
    return f"theorem {name} : {proposition} := {proof_text}"


def assemble_unit(
    import_header: str,
    hypotheses: Iterable[Formalization],
    goal: Formalization,
    goal_proof: str,
    markers: Sequence[str] = DEFAULT_MARKERS,
) -> tuple[str, bool]:
    """Build one compilation unit and police markers.

    Hypotheses are inlined as full previously-proven theorems, never
    assumptions — except items explicitly accepted without proof, which
    are inlined with the incomplete marker and tracked by the caller.
    Returns (code, marker_violation) where the violation flag covers
    every segment that is not an accepted-without-proof hypothesis.
    """
    segments: list[tuple[str, bool]] = []
    for hyp in hypotheses:
        if hyp.status == ACCEPTED_WITHOUT_PROOF:
            segments.append((render_theorem(hyp.name, hyp.code, "sorry"), True))
        else:
            proof = hyp.proof_code if hyp.proof_code else "sorry"
            segments.append((render_theorem(hyp.name, hyp.code, proof), False))
    segments.append((render_theorem(goal.name, goal.code, goal_proof), False))

    violation = any(
        contains_incomplete_marker(text, markers) for text, accepted in segments if not accepted
    )
    parts = [import_header.rstrip()] if import_header.strip() else []
    parts.extend(text for text, _ in segments)
    return "\n\n".join(parts) + "\n", violation


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def check_statement(
    backend: ProverBackend,
    form: Formalization,
    import_header: str = "",
    timeout: float | None = None,
) -> tuple[Formalization, CompileResult]:
    """Compile-check a statement alone (with a placeholder proof body)."""
    unit = render_theorem(form.name, form.code, "sorry")
    if import_header.strip():
        unit = import_header.rstrip() + "\n\n" + unit
    result = backend.check_compile(unit, timeout=timeout)
    status = COMPILE_OK if result.ok else COMPILE_ERROR
    return replace(form, status=status, diagnostics=result.diagnostics), result


def attempt_proof(
    backend: ProverBackend,
    goal: Formalization,
    hypotheses: Sequence[Formalization],
    prover_output: str,
    import_header: str = "",
    markers: Sequence[str] = DEFAULT_MARKERS,
    timeout: float | None = None,
) -> tuple[Formalization, CompileResult]:
    """Compile the goal's proof against its established hypotheses.

    ProvedOk requires a clean compile and no incomplete marker outside
    accepted-without-proof segments.
    """
    if goal.status not in (COMPILE_OK, PROOF_FAILED, PROVED_OK):
        raise ValueError(f"goal must compile before proving (status={goal.status})")
    unit, marker_violation = assemble_unit(import_header, hypotheses, goal, prover_output, markers)
    result = backend.check_compile(unit, timeout=timeout)
    if result.ok and not marker_violation:
        status = PROVED_OK
        diagnostics = result.diagnostics
    else:
        status = PROOF_FAILED
        diagnostics = result.diagnostics
        if result.ok and marker_violation:
            diagnostics = diagnostics + (
                Diagnostic("error", 0, 0, "incomplete-proof marker present in proof"),
            )
    return replace(goal, status=status, proof_code=prover_output, diagnostics=diagnostics), result


def trivial_check(
    backend: ProverBackend,
    goal: Formalization,
    automation_budget: float,
    tactic: str = "by first | norm_num | decide | simp",
    import_header: str = "",
) -> bool:
    """Can stock automation close the goal with no lemmas at all?

    Used to downgrade a verdict on problems so easy the proof assistant
    needs no solution structure.  A zero budget means no.
    """
    if automation_budget <= 0:
        return False
    if goal.status != COMPILE_OK:
        raise ValueError("trivial_check needs a compiled goal statement")
    unit = render_theorem(f"{goal.name}_auto", goal.code, tactic)
    if import_header.strip():
        unit = import_header.rstrip() + "\n\n" + unit
    result = backend.check_compile(unit, timeout=automation_budget)
    return result.ok and not contains_incomplete_marker(unit)
