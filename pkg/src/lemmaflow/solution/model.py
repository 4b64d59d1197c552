"""Value types for lemma-structured solutions.

All types are frozen dataclasses with JSON round-tripping.  A solution
is an ordered list of lemmas; each lemma is a set of premises and one
atomic conclusion; premises trace back to the problem's givens, to
earlier conclusions, or to standalone facts.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any

VARIABLE_TYPES = ("integer", "rational", "real", "natural", "boolean")

VARIABLE_TYPE_ALIASES = {
    "int": "integer",
    "integer": "integer",
    "rat": "rational",
    "rational": "rational",
    "real": "real",
    "nat": "natural",
    "natural": "natural",
    "bool": "boolean",
    "boolean": "boolean",
}

VARIABLE_ORIGINS = ("given", "introduced")

# Connective words whose case is irrelevant to a statement's identity.
# Only these are folded when hashing; variable names keep their case so
# that `x` and `X` stay distinct statements.
_CONNECTIVE_KEYWORDS = frozenset(
    {
        "and", "or", "not", "if", "then", "else", "iff", "implies",
        "forall", "exists", "therefore", "thus", "hence", "so", "where",
    }
)

_WORD_RE = re.compile(r"[A-Za-z]+")


def normalize_statement_text(text: str) -> str:
    """Collapse whitespace and strip trailing sentence punctuation."""
    t = " ".join(text.split())
    return t.rstrip(".;").strip()


def _fold_keyword_case(text: str) -> str:
    return _WORD_RE.sub(
        lambda m: m.group(0).lower() if m.group(0).lower() in _CONNECTIVE_KEYWORDS else m.group(0),
        text,
    )


def statement_sid(text: str) -> str:
    """Deterministic content id: whitespace-collapsed, keyword-case-folded hash."""
    canon = _fold_keyword_case(normalize_statement_text(text))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Statement:
    """A normalized proposition plus its content id."""

    text: str
    sid: str

    @classmethod
    def of(cls, raw: str) -> "Statement":
        t = normalize_statement_text(raw)
        return cls(text=t, sid=statement_sid(t))

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "sid": self.sid}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Statement":
        return cls(text=d["text"], sid=d["sid"])


@dataclass(frozen=True)
class Provenance:
    """Resolved source of a premise: a given, a fact, or an earlier lemma."""

    kind: str  # "given" | "fact" | "prior"
    index: int | None = None

    @classmethod
    def given(cls, k: int) -> "Provenance":
        return cls("given", k)

    @classmethod
    def fact(cls) -> "Provenance":
        return cls("fact", None)

    @classmethod
    def prior(cls, j: int) -> "Provenance":
        return cls("prior", j)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "index": self.index}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Provenance":
        return cls(kind=d["kind"], index=d.get("index"))


@dataclass(frozen=True)
class SourceTag:
    """Raw source annotation as written in the solution text.

    `[GIVEN]` and `[FACT]` carry no index; `[LEMMA j]` carries j.
    Tags are claims to be re-validated, not resolved provenance.
    """

    kind: str  # "given" | "fact" | "lemma"
    index: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "index": self.index}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SourceTag":
        return cls(kind=d["kind"], index=d.get("index"))


@dataclass(frozen=True)
class Premise:
    statement: Statement
    tag: SourceTag | None = None
    provenance: Provenance | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "statement": self.statement.to_dict(),
            "tag": self.tag.to_dict() if self.tag else None,
            "provenance": self.provenance.to_dict() if self.provenance else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Premise":
        return cls(
            statement=Statement.from_dict(d["statement"]),
            tag=SourceTag.from_dict(d["tag"]) if d.get("tag") else None,
            provenance=Provenance.from_dict(d["provenance"]) if d.get("provenance") else None,
        )


@dataclass(frozen=True)
class Lemma:
    """One logical step: premises imply a single conclusion."""

    index: int
    premises: tuple[Premise, ...]
    conclusion: Statement

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "premises": [p.to_dict() for p in self.premises],
            "conclusion": self.conclusion.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Lemma":
        return cls(
            index=d["index"],
            premises=tuple(Premise.from_dict(p) for p in d["premises"]),
            conclusion=Statement.from_dict(d["conclusion"]),
        )


@dataclass(frozen=True)
class VariableDecl:
    name: str
    vartype: str  # one of VARIABLE_TYPES
    origin: str = "given"  # "given" | "introduced"

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "vartype": self.vartype, "origin": self.origin}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VariableDecl":
        return cls(name=d["name"], vartype=d["vartype"], origin=d.get("origin", "given"))


@dataclass(frozen=True)
class ProblemStatement:
    """A problem to verify a solution against.

    `trusted_goal` is an operator-supplied formalization of the main
    theorem; when present it overrides machine translation of the goal.
    `label` is dataset ground truth (True = a correct, well-explained
    solution should verify).
    """

    id: str
    text: str
    answer: str | None = None
    trusted_goal: str | None = None
    label: bool | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be nonempty")
        if not self.text or not self.text.strip():
            raise ValueError("problem text must be nonempty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "answer": self.answer,
            "trusted_goal": self.trusted_goal,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ProblemStatement":
        return cls(
            id=d["id"],
            text=d["text"],
            answer=d.get("answer"),
            trusted_goal=d.get("trusted_goal"),
            label=d.get("label"),
        )


@dataclass(frozen=True)
class StructuredSolution:
    problem_id: str
    variables: tuple[VariableDecl, ...]
    lemmas: tuple[Lemma, ...]
    goal: Statement
    raw_text: str = ""

    @property
    def needs_final_gap(self) -> bool:
        """True when the last conclusion does not textually meet the goal."""
        if not self.lemmas:
            return True
        return self.lemmas[-1].conclusion.sid != self.goal.sid

    def lemma_by_index(self, index: int) -> Lemma | None:
        for lem in self.lemmas:
            if lem.index == index:
                return lem
        return None

    def structure_key(self) -> tuple:
        """Comparable shape of the solution, ignoring raw text and provenance."""
        return (
            tuple((v.name, v.vartype, v.origin) for v in self.variables),
            tuple(
                (
                    lem.index,
                    tuple(
                        (p.statement.sid, (p.tag.kind, p.tag.index) if p.tag else None)
                        for p in lem.premises
                    ),
                    lem.conclusion.sid,
                )
                for lem in self.lemmas
            ),
            self.goal.sid,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem_id": self.problem_id,
            "variables": [v.to_dict() for v in self.variables],
            "lemmas": [lem.to_dict() for lem in self.lemmas],
            "goal": self.goal.to_dict(),
            "raw_text": self.raw_text,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StructuredSolution":
        return cls(
            problem_id=d["problem_id"],
            variables=tuple(VariableDecl.from_dict(v) for v in d["variables"]),
            lemmas=tuple(Lemma.from_dict(m) for m in d["lemmas"]),
            goal=Statement.from_dict(d["goal"]),
            raw_text=d.get("raw_text", ""),
        )

    def with_lemmas(self, lemmas: tuple[Lemma, ...]) -> "StructuredSolution":
        return replace(self, lemmas=lemmas)


@dataclass(frozen=True)
class Violation:
    """A structural problem found by validation.  Data, not an exception."""

    code: str
    message: str
    at: int | None = None  # lemma index, when applicable
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "at": self.at, "detail": self.detail}


# Violation codes
NON_CONTIGUOUS_INDICES = "NonContiguousIndices"
NON_ATOMIC_CONCLUSION = "NonAtomicConclusion"
CONDITIONAL_CONCLUSION = "ConditionalConclusion"
FORWARD_REFERENCE = "ForwardReference"
MISSING_GOAL_TEXT = "MissingGoalText"
UNDECLARED_VARIABLE = "UndeclaredVariable"


class ParseError(Exception):
    """Raised when solution text deviates too far from the block grammar."""

    # codes
    EMPTY_INPUT = "EmptyInput"
    NO_LEMMAS_FOUND = "NoLemmasFound"
    MALFORMED_LEMMA_BLOCK = "MalformedLemmaBlock"
    MISSING_GOAL = "MissingGoal"
    UNKNOWN_VARIABLE_TYPE = "UnknownVariableType"
    MALFORMED_VARIABLE_DECL = "MalformedVariableDecl"
    DUPLICATE_VARIABLE = "DuplicateVariable"

    def __init__(
        self,
        code: str,
        message: str,
        line: int = 1,
        column: int = 1,
        detail: dict[str, Any] | None = None,
    ):
        super().__init__(f"{code} at {line}:{column}: {message}")
        self.code = code
        self.message = message
        self.line = line
        self.column = column
        self.detail = detail or {}
