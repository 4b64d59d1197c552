"""Structure normalization, premise classification and validation.

Normalization rewrites a parsed solution into the canonical shape the
rest of the pipeline assumes: conjunction conclusions are split into
separate lemmas, tautological lemmas are dropped, indices stay
contiguous and source tags are re-pointed.  Classification then gives
every premise exactly one provenance by exact content-id matching.
"""

from __future__ import annotations

import re
from dataclasses import replace

from .model import (
    CONDITIONAL_CONCLUSION,
    FORWARD_REFERENCE,
    MISSING_GOAL_TEXT,
    NON_ATOMIC_CONCLUSION,
    NON_CONTIGUOUS_INDICES,
    UNDECLARED_VARIABLE,
    Lemma,
    Premise,
    ProblemStatement,
    Provenance,
    SourceTag,
    Statement,
    StructuredSolution,
    Violation,
)


class NormalizationCycle(Exception):
    """Tag re-pointing produced a forward or self reference: malformed input."""


class ClassificationError(Exception):
    """A source tag could not be validated against any matching statement."""

    def __init__(self, message: str, lemma_index: int, premise_text: str):
        super().__init__(message)
        self.lemma_index = lemma_index
        self.premise_text = premise_text


# ---------------------------------------------------------------------------
# conjunction / conditional detection
# ---------------------------------------------------------------------------

_OPENERS = "([{⟨"
_CLOSERS = ")]}⟩"

_CONDITIONAL_RE = re.compile(r"(?i)\bif\b.*\belse\b")


def split_top_level_conjunction(text: str) -> list[str]:
    """Split a statement on conjunction markers outside any brackets.

    Only the explicit markers count: the word ``AND`` in upper case, or
    ``∧``.  A lowercase natural-language "and" is left alone — if the
    statement is genuinely compound it will fail at the proving stage
    instead of being mangled here.
    """
    parts: list[str] = []
    depth = 0
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _OPENERS:
            depth += 1
        elif ch in _CLOSERS:
            depth = max(0, depth - 1)
        elif depth == 0:
            if ch == "∧":
                parts.append(text[start:i])
                start = i + 1
            elif text.startswith("AND", i):
                before_ok = i == 0 or not (text[i - 1].isalnum() or text[i - 1] == "_")
                after = i + 3
                after_ok = after >= n or not (text[after].isalnum() or text[after] == "_")
                if before_ok and after_ok:
                    parts.append(text[start:i])
                    start = after
                    i = after
                    continue
        i += 1
    parts.append(text[start:])
    cleaned = [p.strip() for p in parts if p.strip()]
    return cleaned if len(cleaned) > 1 else [text.strip()]


def has_conditional_shape(text: str) -> bool:
    return bool(_CONDITIONAL_RE.search(text))


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def _apply_rewrite_rules(sol: StructuredSolution, rules) -> StructuredSolution:
    if not rules:
        return sol
    compiled = [(re.compile(pat), repl) for pat, repl in rules]

    def rewrite(stmt: Statement) -> Statement:
        text = stmt.text
        for rx, repl in compiled:
            text = rx.sub(repl, text)
        return Statement.of(text)

    lemmas = tuple(
        Lemma(
            index=lem.index,
            premises=tuple(replace(p, statement=rewrite(p.statement)) for p in lem.premises),
            conclusion=rewrite(lem.conclusion),
        )
        for lem in sol.lemmas
    )
    return replace(sol, lemmas=lemmas, goal=rewrite(sol.goal))


class _Rec:
    """Mutable lemma record used while normalizing."""

    __slots__ = ("premises", "conclusion", "pos")

    def __init__(self, premises: list[Premise], conclusion: Statement):
        self.premises = premises
        self.conclusion = conclusion
        self.pos = 0  # 1-based position, maintained by _renumber


def _renumber(recs: list[_Rec]) -> None:
    for i, rec in enumerate(recs, start=1):
        rec.pos = i


def _remap_tags(recs: list[_Rec], mapping: dict[int, dict]) -> None:
    """Re-point [LEMMA j] tags after a structural change.

    mapping: old position -> {"kind": "same"|"split"|"deleted", ...}.
    Split targets are chosen by content id; a reference to a deleted
    tautology inherits the tag of the premise that made it tautological.
    """
    for rec in recs:
        new_premises: list[Premise] = []
        for p in rec.premises:
            if p.tag is None or p.tag.kind != "lemma":
                new_premises.append(p)
                continue
            entry = mapping.get(p.tag.index)
            if entry is None:
                # referenced index never existed; keep for validation to flag
                new_premises.append(p)
                continue
            if entry["kind"] == "same":
                new_premises.append(replace(p, tag=SourceTag("lemma", entry["pos"])))
            elif entry["kind"] == "split":
                parts = entry["parts"]  # list of (pos, sid, statement)
                matched = [pos for pos, sid, _ in parts if sid == p.statement.sid]
                if matched:
                    new_premises.append(replace(p, tag=SourceTag("lemma", matched[0])))
                elif p.statement.sid == entry["old_sid"]:
                    # premise quoted the old conjunction: expand it into
                    # one premise per split part
                    for pos, _, stmt in parts:
                        new_premises.append(Premise(statement=stmt, tag=SourceTag("lemma", pos)))
                else:
                    new_premises.append(replace(p, tag=SourceTag("lemma", parts[0][0])))
            else:  # deleted
                inherited = entry["inherited"]
                new_premises.append(replace(p, tag=inherited))
        rec.premises = new_premises


def _split_pass(recs: list[_Rec]) -> bool:
    for at, rec in enumerate(recs):
        parts = split_top_level_conjunction(rec.conclusion.text)
        if len(parts) <= 1:
            continue
        old_pos = rec.pos
        old_sid = rec.conclusion.sid
        new_recs = [_Rec(list(rec.premises), Statement.of(t)) for t in parts]
        recs[at : at + 1] = new_recs
        _renumber(recs)
        mapping: dict[int, dict] = {}
        for pos in range(1, old_pos):
            mapping[pos] = {"kind": "same", "pos": pos}
        mapping[old_pos] = {
            "kind": "split",
            "old_sid": old_sid,
            "parts": [(r.pos, r.conclusion.sid, r.conclusion) for r in new_recs],
        }
        shift = len(new_recs) - 1
        for pos in range(old_pos + 1, len(recs) - shift + 1):
            mapping[pos] = {"kind": "same", "pos": pos + shift}
        _remap_tags(recs, mapping)
        return True
    return False


def _tautology_pass(recs: list[_Rec]) -> bool:
    doomed = [rec for rec in recs if any(p.statement.sid == rec.conclusion.sid for p in rec.premises)]
    if not doomed:
        return False
    doomed_set = {id(r) for r in doomed}

    # tag inherited by references to a deleted record: the tag of the
    # premise that equals its conclusion, chased through chains of
    # deletions
    raw_inherit: dict[int, SourceTag | None] = {}
    for rec in doomed:
        match = next(p for p in rec.premises if p.statement.sid == rec.conclusion.sid)
        raw_inherit[rec.pos] = match.tag

    survivors = [r for r in recs if id(r) not in doomed_set]
    old_positions = {r.pos: r for r in recs}

    def resolve(pos: int, hops: int = 0) -> SourceTag | None:
        if hops > len(recs) + 1:
            raise NormalizationCycle(f"tautology chain starting at lemma {pos} never resolves")
        tag = raw_inherit.get(pos)
        if tag is None:
            return None
        if tag.kind == "lemma" and tag.index in raw_inherit:
            return resolve(tag.index, hops + 1)
        return tag

    mapping: dict[int, dict] = {}
    new_pos = {id(r): i for i, r in enumerate(survivors, start=1)}
    for pos, rec in old_positions.items():
        if id(rec) in doomed_set:
            inherited = resolve(pos)
            if inherited is not None and inherited.kind == "lemma":
                target = old_positions.get(inherited.index)
                if target is not None and id(target) in new_pos:
                    inherited = SourceTag("lemma", new_pos[id(target)])
                else:
                    inherited = None
            mapping[pos] = {"kind": "deleted", "inherited": inherited}
        else:
            mapping[pos] = {"kind": "same", "pos": new_pos[id(rec)]}

    recs[:] = survivors
    _renumber(recs)
    _remap_tags(recs, mapping)
    return True


def normalize(sol: StructuredSolution, rewrite_rules=()) -> StructuredSolution:
    """Split conjunction conclusions, drop tautologies, renumber.

    Idempotent: a second pass over the result is the identity.  The
    optional rewrite_rules table is a list of (regex, replacement)
    pairs applied to every statement first; it ships empty.
    """
    sol = _apply_rewrite_rules(sol, rewrite_rules)
    recs = [_Rec(list(lem.premises), lem.conclusion) for lem in sol.lemmas]
    _renumber(recs)

    guard = 0
    changed = True
    while changed:
        guard += 1
        if guard > 10 * (len(recs) + len(sol.lemmas) + 2):
            raise NormalizationCycle("normalization did not stabilize")
        changed = _split_pass(recs)
        if not changed:
            changed = _tautology_pass(recs)

    for rec in recs:
        for p in rec.premises:
            if p.tag is not None and p.tag.kind == "lemma" and p.tag.index >= rec.pos:
                raise NormalizationCycle(
                    f"lemma {rec.pos} cites lemma {p.tag.index}, which is not earlier"
                )

    lemmas = tuple(
        Lemma(index=rec.pos, premises=tuple(rec.premises), conclusion=rec.conclusion) for rec in recs
    )
    return sol.with_lemmas(lemmas)


# ---------------------------------------------------------------------------
# premise classification
# ---------------------------------------------------------------------------

_LEAD_IN_RE = re.compile(
    r"(?i)^(?:given that|given|suppose that|suppose|assume that|assume|"
    r"we know that|it is known that|let|then)\b[:,]?\s*"
)


def extract_givens(problem_text: str) -> list[Statement]:
    """Candidate given statements read off the problem text.

    Segments split at sentence punctuation; common lead-ins such as
    "Suppose" or "Given that" are stripped; questions are dropped.
    Matching against premises is by exact content id, so a segment that
    is not really a given simply never matches.
    """
    out: list[Statement] = []
    for seg in re.split(r"[.;\n]+", problem_text):
        seg = seg.strip()
        if not seg or seg.endswith("?"):
            continue
        for _ in range(3):
            stripped = _LEAD_IN_RE.sub("", seg)
            if stripped == seg:
                break
            seg = stripped.strip()
        if not seg:
            continue
        stmt = Statement.of(seg)
        if stmt.text:
            out.append(stmt)
    return out


def classify_premises(sol: StructuredSolution, prob: ProblemStatement) -> StructuredSolution:
    """Resolve every premise to exactly one provenance.

    Matching is exact content-id equality, in priority order: a given
    from the problem text, then an earlier lemma's conclusion, then a
    standalone fact.  Explicit [GIVEN] and [LEMMA j] tags are validated
    rather than trusted; a tag that matches nothing raises
    ClassificationError instead of being silently reclassified.
    """
    givens = extract_givens(prob.text)
    given_by_sid = {}
    for k, g in enumerate(givens, start=1):
        given_by_sid.setdefault(g.sid, k)

    conclusion_sid_to_index: dict[str, int] = {}
    new_lemmas: list[Lemma] = []
    for lem in sol.lemmas:
        new_premises: list[Premise] = []
        for p in lem.premises:
            sid = p.statement.sid
            if p.tag is not None and p.tag.kind == "given":
                k = given_by_sid.get(sid)
                if k is None:
                    raise ClassificationError(
                        f"lemma {lem.index} tags {p.statement.text!r} as GIVEN "
                        "but no given in the problem matches it",
                        lem.index,
                        p.statement.text,
                    )
                prov = Provenance.given(k)
            elif p.tag is not None and p.tag.kind == "lemma":
                j = p.tag.index
                cited = sol.lemma_by_index(j) if j is not None else None
                if j is None or j >= lem.index or cited is None or cited.conclusion.sid != sid:
                    raise ClassificationError(
                        f"lemma {lem.index} tags {p.statement.text!r} as LEMMA {j} "
                        "but that lemma's conclusion does not match",
                        lem.index,
                        p.statement.text,
                    )
                prov = Provenance.prior(j)
            else:
                # untagged, or tagged FACT: recover the source by content
                if sid in given_by_sid:
                    prov = Provenance.given(given_by_sid[sid])
                elif sid in conclusion_sid_to_index and conclusion_sid_to_index[sid] < lem.index:
                    prov = Provenance.prior(conclusion_sid_to_index[sid])
                else:
                    prov = Provenance.fact()
            new_premises.append(replace(p, provenance=prov))
        conclusion_sid_to_index.setdefault(lem.conclusion.sid, lem.index)
        new_lemmas.append(replace(lem, premises=tuple(new_premises)))
    return sol.with_lemmas(tuple(new_lemmas))


# ---------------------------------------------------------------------------
# structural validation
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*|\d+(?:\.\d+)?|[^\sA-Za-z0-9_]")
_MATH_OPS = set("=<>+-*/^") | {"≤", "≥", "≠", "→", "·", "%"}


def used_variable_names(text: str) -> set[str]:
    """Single-letter identifiers that sit next to an operator or number.

    A heuristic: "3*x = 9" yields {x}, while the "a" in "a and b are
    integers" has no operator neighbour and is ignored, as are words
    like "of" in "the gcd of 12 and 8" (not single letters).
    """
    tokens = _IDENT_RE.findall(text)
    used: set[str] = set()
    for i, tok in enumerate(tokens):
        if not re.fullmatch(r"[A-Za-z][0-9']{0,2}", tok):
            continue
        neighbours = []
        if i > 0:
            neighbours.append(tokens[i - 1])
        if i + 1 < len(tokens):
            neighbours.append(tokens[i + 1])
        for nb in neighbours:
            if nb in _MATH_OPS or re.fullmatch(r"\d+(?:\.\d+)?", nb):
                used.add(tok)
                break
    return used


def validate_structure(
    sol: StructuredSolution, intro_variables: bool | None = None
) -> list[Violation]:
    """Check the solution's form; an empty list means well-formed.

    Violations are data, not failures.  When intro_variables is None
    the variable-declaration check applies iff the solution declares a
    VARIABLES block.
    """
    violations: list[Violation] = []

    indices = [lem.index for lem in sol.lemmas]
    if indices != list(range(1, len(indices) + 1)):
        violations.append(
            Violation(
                NON_CONTIGUOUS_INDICES,
                f"lemma indices {indices} are not 1..{len(indices)}",
                detail={"indices": indices},
            )
        )

    for lem in sol.lemmas:
        if len(split_top_level_conjunction(lem.conclusion.text)) > 1:
            violations.append(
                Violation(
                    NON_ATOMIC_CONCLUSION,
                    f"lemma {lem.index} concludes a conjunction",
                    at=lem.index,
                )
            )
        if has_conditional_shape(lem.conclusion.text):
            violations.append(
                Violation(
                    CONDITIONAL_CONCLUSION,
                    f"lemma {lem.index} concludes a conditional",
                    at=lem.index,
                )
            )
        for p in lem.premises:
            cited = None
            if p.tag is not None and p.tag.kind == "lemma":
                cited = p.tag.index
            elif p.provenance is not None and p.provenance.kind == "prior":
                cited = p.provenance.index
            if cited is not None and cited >= lem.index:
                violations.append(
                    Violation(
                        FORWARD_REFERENCE,
                        f"lemma {lem.index} cites lemma {cited}",
                        at=lem.index,
                        detail={"at": lem.index, "cites": cited},
                    )
                )

    if not sol.goal.text:
        violations.append(Violation(MISSING_GOAL_TEXT, "goal statement is empty"))

    check_vars = intro_variables if intro_variables is not None else bool(sol.variables)
    if check_vars:
        declared = {v.name for v in sol.variables}
        reported: set[str] = set()
        for lem in sol.lemmas:
            texts = [p.statement.text for p in lem.premises] + [lem.conclusion.text]
            for text in texts:
                for name in sorted(used_variable_names(text)):
                    if name not in declared and name not in reported:
                        reported.add(name)
                        violations.append(
                            Violation(
                                UNDECLARED_VARIABLE,
                                f"variable {name!r} is used but not declared",
                                at=lem.index,
                                detail={"name": name},
                            )
                        )
    return violations
