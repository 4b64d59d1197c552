"""Mechanical translation-quality checks.

Four decidable checks stand in for "nothing important was lost in
translation": every numeric literal survives, every declared variable
used in the statement shows up with its declared type, the code states
exactly one goal, and no incomplete-proof marker hides inside a
statement formalization.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

from ..backend import contains_incomplete_marker
from ..solution import VariableDecl, used_variable_names

LEAN_TYPE_TOKENS: dict[str, tuple[str, ...]] = {
    "integer": ("ℤ", "Int"),
    "rational": ("ℚ", "Rat"),
    "real": ("ℝ", "Real"),
    "natural": ("ℕ", "Nat"),
    "boolean": ("Bool", "Prop"),
}

_NUM_RE = re.compile(r"\d+(?:\.\d+)?")
_DECL_RE = re.compile(r"(?m)^\s*(theorem|lemma|example)\b")
_BINDER_RE = re.compile(r"[(\{⟨]([^(){}⟨⟩]*?):([^(){}⟨⟩]*?)[)\}⟩]")


def _binder_groups(code: str) -> list[tuple[str, str]]:
    groups = list(_BINDER_RE.findall(code))
    # `∀ x : T,` style binders without brackets
    for m in re.finditer(r"∀\s*([A-Za-z0-9_' ]+?)\s*:\s*([^,]+),", code):
        groups.append((m.group(1), m.group(2)))
    return groups


def _variable_typed_ok(name: str, vartype: str, code: str) -> bool:
    if not re.search(rf"(?<![A-Za-z0-9_']){re.escape(name)}(?![A-Za-z0-9_'])", code):
        return False
    tokens = LEAN_TYPE_TOKENS.get(vartype, ())
    groups = _binder_groups(code)
    for names, typeside in groups:
        if re.search(rf"(?<![A-Za-z0-9_']){re.escape(name)}(?![A-Za-z0-9_'])", names):
            return any(tok in typeside for tok in tokens)
    # no binder group mentions the variable: accept if the declared
    # type token appears at all (loose fallback for unusual shapes)
    return any(tok in code for tok in tokens)


def translation_quality_issues(
    statement_texts: Sequence[str],
    code: str,
    declared_vars: Iterable[VariableDecl] = (),
    check_variables: bool = False,
    markers: Sequence[str] = ("sorry", "admit"),
) -> list[str]:
    """Issues found by the four checks; empty list means acceptable."""
    issues: list[str] = []

    stmt_numbers: set[str] = set()
    for text in statement_texts:
        stmt_numbers.update(_NUM_RE.findall(text))
    code_numbers = set(_NUM_RE.findall(code))
    for number in sorted(stmt_numbers - code_numbers, key=lambda s: (len(s), s)):
        issues.append(f"numeric literal {number} from the statement is missing in the code")

    if check_variables:
        used: set[str] = set()
        for text in statement_texts:
            used.update(used_variable_names(text))
        for var in declared_vars:
            if var.name in used and not _variable_typed_ok(var.name, var.vartype, code):
                issues.append(
                    f"variable {var.name!r} is not present with declared type {var.vartype}"
                )

    decl_count = len(_DECL_RE.findall(code))
    if decl_count > 1:
        issues.append(f"code declares {decl_count} goals; exactly one expected")

    if contains_incomplete_marker(code, markers):
        issues.append("incomplete-proof marker inside a statement formalization")

    return issues
