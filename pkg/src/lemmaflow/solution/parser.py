"""Block-grammar parser for structured solutions.

The grammar is deliberately small so a language model can be prompted
into it and a scanner can recover it deterministically:

    VARIABLES:
      x : integer (given)
    LEMMA 1:
    PREMISES:
      [GIVEN] 3*x = 9
    CONCLUSION:
      x = 3
    GOAL: x = 3

Keywords are case-insensitive and may share a line (``LEMMA 1:
PREMISES: [GIVEN] 3*x = 9; CONCLUSION: x = 3``); a ``;`` acts as a line
break.  Premise tags are ``[GIVEN]``, ``[FACT]``, ``[LEMMA j]`` or
absent (classification recovers missing tags later).
"""

from __future__ import annotations

import re

from .model import (
    VARIABLE_TYPE_ALIASES,
    Lemma,
    ParseError,
    Premise,
    SourceTag,
    Statement,
    StructuredSolution,
    VariableDecl,
)

_KEYWORD_RE = re.compile(r"(?i)\b(VARIABLES|LEMMA\s+(\d+)|PREMISES|CONCLUSION|GOAL)\s*:")

_TAG_RE = re.compile(r"(?i)^\[\s*(GIVEN|FACT|LEMMA\s+(\d+))\s*\]\s*(.*)$")

_VAR_DECL_RE = re.compile(
    r"^([A-Za-z_][A-Za-z0-9_']*)\s*:\s*([A-Za-z]+)\s*(?:\(\s*(given|introduced)\s*\))?$",
    re.IGNORECASE,
)


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    last_nl = text.rfind("\n", 0, pos)
    return line, pos - last_nl


def _is_block_start(text: str, start: int) -> bool:
    # A keyword opens a block only at the start of a line, after ';',
    # or directly after another keyword's ':' — this keeps words like
    # "goal:" inside ordinary statement text from being swallowed.
    i = start - 1
    while i >= 0 and text[i] in " \t":
        i -= 1
    return i < 0 or text[i] in "\n;:"


def _scan_sections(text: str) -> list[tuple[str, int | None, str, int]]:
    """Split text into (kind, lemma_index, content, offset) sections."""
    marks = []
    for m in _KEYWORD_RE.finditer(text):
        if not _is_block_start(text, m.start()):
            continue
        word = m.group(1).upper()
        if word.startswith("LEMMA"):
            marks.append(("LEMMA", int(m.group(2)), m.start(), m.end()))
        else:
            marks.append((word, None, m.start(), m.end()))
    sections = []
    for i, (kind, idx, start, kw_end) in enumerate(marks):
        end = marks[i + 1][2] if i + 1 < len(marks) else len(text)
        sections.append((kind, idx, text[kw_end:end], start))
    return sections


def _split_entries(content: str) -> list[str]:
    """Break section content into entries at newlines and semicolons."""
    out = []
    for line in content.split("\n"):
        for chunk in line.split(";"):
            chunk = chunk.strip()
            if chunk:
                out.append(chunk)
    return out


def _parse_variables(content: str, offset: int, text: str, seen: dict[str, int]) -> list[VariableDecl]:
    decls = []
    entries = []
    for line in content.split("\n"):
        for chunk in re.split(r"[;,]", line):
            chunk = chunk.strip()
            if chunk:
                entries.append(chunk)
    for entry in entries:
        m = _VAR_DECL_RE.match(entry)
        line, col = _line_col(text, offset)
        if not m:
            raise ParseError(
                ParseError.MALFORMED_VARIABLE_DECL,
                f"cannot read variable declaration {entry!r}",
                line,
                col,
            )
        name, rawtype, origin = m.group(1), m.group(2).lower(), (m.group(3) or "given").lower()
        vartype = VARIABLE_TYPE_ALIASES.get(rawtype)
        if vartype is None:
            raise ParseError(
                ParseError.UNKNOWN_VARIABLE_TYPE,
                f"variable {name!r} has unknown type {rawtype!r}",
                line,
                col,
                detail={"name": name, "vartype": rawtype},
            )
        if name in seen:
            raise ParseError(
                ParseError.DUPLICATE_VARIABLE,
                f"variable {name!r} declared twice",
                line,
                col,
                detail={"name": name},
            )
        seen[name] = 1
        decls.append(VariableDecl(name=name, vartype=vartype, origin=origin))
    return decls


def _parse_premise(entry: str) -> Premise:
    m = _TAG_RE.match(entry)
    if not m:
        return Premise(statement=Statement.of(entry))
    tag_word = m.group(1).upper()
    rest = m.group(3).strip()
    if tag_word.startswith("LEMMA"):
        tag = SourceTag("lemma", int(m.group(2)))
    elif tag_word == "GIVEN":
        tag = SourceTag("given")
    else:
        tag = SourceTag("fact")
    return Premise(statement=Statement.of(rest), tag=tag)


def parse_structured_solution(text: str, problem_id: str = "") -> StructuredSolution:
    """Parse solution text into its typed form.

    Raises ParseError with a violation code plus line/column when the
    text deviates too far from the grammar to recover.
    """
    if not text or not text.strip():
        raise ParseError(ParseError.EMPTY_INPUT, "empty solution text")

    sections = _scan_sections(text)

    variables: list[VariableDecl] = []
    seen_vars: dict[str, int] = {}
    lemmas: list[Lemma] = []
    goal: Statement | None = None

    pending_index: int | None = None
    pending_premises: list[Premise] = []
    pending_conclusion: Statement | None = None
    pending_offset = 0

    def finalize_pending() -> None:
        nonlocal pending_index, pending_premises, pending_conclusion
        if pending_index is None:
            return
        if pending_conclusion is None or not pending_conclusion.text:
            line, col = _line_col(text, pending_offset)
            raise ParseError(
                ParseError.MALFORMED_LEMMA_BLOCK,
                f"lemma {pending_index} has no conclusion",
                line,
                col,
                detail={"index": pending_index},
            )
        lemmas.append(
            Lemma(index=pending_index, premises=tuple(pending_premises), conclusion=pending_conclusion)
        )
        pending_index, pending_premises, pending_conclusion = None, [], None

    for kind, idx, content, offset in sections:
        line, col = _line_col(text, offset)
        if kind == "VARIABLES":
            variables.extend(_parse_variables(content, offset, text, seen_vars))
        elif kind == "LEMMA":
            finalize_pending()
            pending_index = idx
            pending_offset = offset
            # anything between the header and the next keyword is noise;
            # premises and the conclusion arrive in their own sections
        elif kind == "PREMISES":
            if pending_index is None:
                raise ParseError(
                    ParseError.MALFORMED_LEMMA_BLOCK,
                    "PREMISES outside of a lemma block",
                    line,
                    col,
                    detail={"index": 0},
                )
            for entry in _split_entries(content):
                premise = _parse_premise(entry)
                if not premise.statement.text:
                    raise ParseError(
                        ParseError.MALFORMED_LEMMA_BLOCK,
                        f"lemma {pending_index} has an empty premise",
                        line,
                        col,
                        detail={"index": pending_index},
                    )
                pending_premises.append(premise)
        elif kind == "CONCLUSION":
            if pending_index is None:
                raise ParseError(
                    ParseError.MALFORMED_LEMMA_BLOCK,
                    "CONCLUSION outside of a lemma block",
                    line,
                    col,
                    detail={"index": 0},
                )
            joined = " ".join(_split_entries(content))
            pending_conclusion = Statement.of(joined)
        elif kind == "GOAL":
            finalize_pending()
            if goal is None:
                joined = " ".join(_split_entries(content))
                if joined:
                    goal = Statement.of(joined)

    finalize_pending()

    if not lemmas:
        raise ParseError(ParseError.NO_LEMMAS_FOUND, "no lemma blocks found")
    if goal is None or not goal.text:
        raise ParseError(ParseError.MISSING_GOAL, "no GOAL statement found")

    return StructuredSolution(
        problem_id=problem_id,
        variables=tuple(variables),
        lemmas=tuple(lemmas),
        goal=goal,
        raw_text=text,
    )


def serialize_structured_solution(sol: StructuredSolution) -> str:
    """Emit canonical grammar text; parsing it back is structure-preserving."""
    lines: list[str] = []
    if sol.variables:
        lines.append("VARIABLES:")
        for v in sol.variables:
            lines.append(f"  {v.name} : {v.vartype} ({v.origin})")
        lines.append("")
    for lem in sol.lemmas:
        lines.append(f"LEMMA {lem.index}:")
        lines.append("PREMISES:")
        for p in lem.premises:
            if p.tag is None:
                lines.append(f"  {p.statement.text}")
            elif p.tag.kind == "lemma":
                lines.append(f"  [LEMMA {p.tag.index}] {p.statement.text}")
            else:
                lines.append(f"  [{p.tag.kind.upper()}] {p.statement.text}")
        lines.append("CONCLUSION:")
        lines.append(f"  {lem.conclusion.text}")
        lines.append("")
    lines.append(f"GOAL: {sol.goal.text}")
    return "\n".join(lines) + "\n"
