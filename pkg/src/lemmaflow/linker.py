"""Solution hypergraph: reachability, final proof composition, gap repair.

Nodes are statements (givens, facts, lemma conclusions, the goal);
every lemma is one hyperedge from its premise set to its conclusion.
The goal is derivable iff it lies in the forward-chaining closure of
the established sources — a fixpoint, so the answer is independent of
edge firing order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .backend import (
    ACCEPTED_WITHOUT_PROOF,
    ESTABLISHED_STATUSES,
    CompileResult,
    Formalization,
    ProverBackend,
)
from .solution import Lemma, Premise, Provenance, Statement, StructuredSolution

KIND_GIVEN = "given"
KIND_FACT = "fact"
KIND_LEMMA_CONCLUSION = "lemma_conclusion"
KIND_GOAL = "goal"


class DuplicateConclusionWarning(UserWarning):
    """Two lemmas conclude the same statement; both edges are kept."""


@dataclass(frozen=True)
class Node:
    statement: Statement
    kind: str
    index: int | None = None  # given position or lemma index

    def to_dict(self) -> dict[str, Any]:
        return {"statement": self.statement.to_dict(), "kind": self.kind, "index": self.index}


@dataclass(frozen=True)
class HyperEdge:
    premises: tuple[str, ...]  # sids
    conclusion: str  # sid
    lemma_index: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "premises": list(self.premises),
            "conclusion": self.conclusion,
            "lemma_index": self.lemma_index,
        }


@dataclass
class SolutionHypergraph:
    nodes: dict[str, Node] = field(default_factory=dict)
    edges: list[HyperEdge] = field(default_factory=list)
    goal_sid: str = ""

    def source_sids(self) -> set[str]:
        """Nodes no edge concludes: the givens and facts."""
        concluded = {e.conclusion for e in self.edges}
        return {sid for sid in self.nodes if sid not in concluded}

    def out_degree(self, sid: str) -> int:
        return sum(1 for e in self.edges if sid in e.premises)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [self.nodes[sid].to_dict() for sid in sorted(self.nodes)],
            "edges": [e.to_dict() for e in self.edges],
            "goal": self.goal_sid,
        }

    def dump_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)


@dataclass(frozen=True)
class LinkResult:
    status: str  # "Reachable" | "Blocked"
    established: frozenset[str]
    missing: frozenset[str]
    derivation_order: tuple[int, ...]

    @property
    def reachable(self) -> bool:
        return self.status == "Reachable"

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "established": sorted(self.established),
            "missing": sorted(self.missing),
            "derivation_order": list(self.derivation_order),
        }


def build_hypergraph(sol: StructuredSolution) -> SolutionHypergraph:
    """Read nodes and hyperedges off a classified solution.

    Premise provenance decides node kinds; the goal node is marked even
    when it coincides with the last conclusion.  Two lemmas concluding
    the same statement emit a warning but both edges are retained —
    re-proving a statement is harmless redundancy, and dropping an edge
    could orphan a citation.
    """
    g = SolutionHypergraph(goal_sid=sol.goal.sid)

    def add_node(stmt: Statement, kind: str, index: int | None = None) -> None:
        existing = g.nodes.get(stmt.sid)
        if existing is None:
            g.nodes[stmt.sid] = Node(statement=stmt, kind=kind, index=index)
            return
        # goal marking wins; otherwise first kind sticks
        if kind == KIND_GOAL and existing.kind != KIND_GOAL:
            g.nodes[stmt.sid] = Node(statement=existing.statement, kind=KIND_GOAL, index=existing.index)

    seen_conclusions: set[str] = set()
    for lem in sol.lemmas:
        for p in lem.premises:
            prov = p.provenance or Provenance.fact()
            if prov.kind == "given":
                add_node(p.statement, KIND_GIVEN, prov.index)
            elif prov.kind == "fact":
                add_node(p.statement, KIND_FACT)
            # prior-lemma premises become nodes via their source lemma
        if lem.conclusion.sid in seen_conclusions:
            warnings.warn(
                f"lemma {lem.index} re-concludes {lem.conclusion.text!r}; keeping both edges",
                DuplicateConclusionWarning,
                stacklevel=2,
            )
        seen_conclusions.add(lem.conclusion.sid)
        add_node(lem.conclusion, KIND_LEMMA_CONCLUSION, lem.index)
        g.edges.append(
            HyperEdge(
                premises=tuple(p.statement.sid for p in lem.premises),
                conclusion=lem.conclusion.sid,
                lemma_index=lem.index,
            )
        )
    add_node(sol.goal, KIND_GOAL)
    return g


def check_reachability(
    g: SolutionHypergraph,
    established_sources: Iterable[str] | None = None,
    active_lemmas: Iterable[int] | None = None,
) -> LinkResult:
    """Forward-chaining fixpoint from the established sources.

    established_sources: sids taken as already proven; None means pure
    structural mode (every source node counts, except the goal — the
    goal is never assumed).  active_lemmas limits which edges may fire
    (a lemma skipped in an interactive run must not contribute its
    conclusion); None means all.

    Edges fire in ascending lemma-index rounds, which makes
    derivation_order deterministic; the fixpoint itself is
    order-independent.
    """
    if established_sources is None:
        established = set(g.source_sids()) - {g.goal_sid}
    else:
        established = set(established_sources)
    active = None if active_lemmas is None else set(active_lemmas)

    edges = sorted(g.edges, key=lambda e: e.lemma_index)
    order: list[int] = []
    fired: set[int] = set()
    changed = True
    while changed:
        changed = False
        for e in edges:
            if e.lemma_index in fired:
                continue
            if active is not None and e.lemma_index not in active:
                continue
            if all(p in established for p in e.premises):
                fired.add(e.lemma_index)
                order.append(e.lemma_index)
                if e.conclusion not in established:
                    established.add(e.conclusion)
                changed = True

    if g.goal_sid in established:
        return LinkResult(
            status="Reachable",
            established=frozenset(established),
            missing=frozenset(),
            derivation_order=tuple(order),
        )

    # Blocked: walk backward from the goal through unestablished nodes;
    # the missing set is the unestablished frontier — nodes with no
    # usable incoming edge — which is what a human must supply.
    incoming: dict[str, list[HyperEdge]] = {}
    for e in edges:
        if active is not None and e.lemma_index not in active:
            continue
        incoming.setdefault(e.conclusion, []).append(e)

    missing: set[str] = set()
    visited: set[str] = set()
    stack = [g.goal_sid]
    while stack:
        sid = stack.pop()
        if sid in visited or sid in established:
            continue
        visited.add(sid)
        edges_in = incoming.get(sid, [])
        if not edges_in:
            missing.add(sid)
            continue
        for e in edges_in:
            for p in e.premises:
                if p not in established:
                    stack.append(p)
    if not missing:
        # every unestablished ancestor has an incoming edge but the
        # fixpoint still missed the goal: cyclic support, report goal
        missing = {g.goal_sid}
    return LinkResult(
        status="Blocked",
        established=frozenset(established),
        missing=frozenset(missing),
        derivation_order=tuple(order),
    )


def final_gap_repair(
    g: SolutionHypergraph,
    goal_form: Formalization | None,
    link: LinkResult,
) -> Lemma | None:
    """Bridge the last hop when only the goal itself is missing.

    Applies only when the blocked set is exactly the goal and the last
    lemma's conclusion was established; the returned synthetic lemma
    (established terminal conclusions → goal) goes through the normal
    formalize-and-prove path.  Anything wider than the final hop is not
    repaired.
    """
    if link.reachable:
        return None
    if link.missing != frozenset({g.goal_sid}):
        return None
    lemma_indices = [e.lemma_index for e in g.edges]
    if not lemma_indices:
        return None
    last_edge = max(g.edges, key=lambda e: e.lemma_index)
    if last_edge.conclusion not in link.established:
        return None

    used_as_premise = {sid for e in g.edges for sid in e.premises}
    terminals = [
        g.nodes[sid].statement
        for sid in sorted(link.established)
        if sid in g.nodes
        and g.nodes[sid].kind == KIND_LEMMA_CONCLUSION
        and sid not in used_as_premise
    ]
    if not terminals:
        terminals = [g.nodes[last_edge.conclusion].statement]
    goal_stmt = g.nodes[g.goal_sid].statement
    next_index = max(lemma_indices) + 1
    return Lemma(
        index=next_index,
        premises=tuple(
            Premise(statement=t, provenance=Provenance.prior(_lemma_index_of(g, t.sid)))
            for t in terminals
        ),
        conclusion=goal_stmt,
    )


def _lemma_index_of(g: SolutionHypergraph, sid: str) -> int:
    for e in g.edges:
        if e.conclusion == sid:
            return e.lemma_index
    return 0


class CompositionCompileError(Exception):
    """The linked unit would not compile; carries the diagnostics."""

    def __init__(self, message: str, diagnostics=(), unit: str = ""):
        super().__init__(message)
        self.diagnostics = tuple(diagnostics)
        self.unit = unit


def _chain_tactic(names: Sequence[str], depth: int) -> str:
    listing = ", ".join(names)
    return f"by\n  intros\n  solve_by_elim (config := {{ maxDepth := {depth} }}) [{listing}]"


def _sequential_tactic(names: Sequence[str], last_name: str, depth: int) -> str:
    listing = ", ".join(names)
    return (
        "by\n  intros\n"
        f"  apply {last_name} <;>\n"
        f"  solve_by_elim (config := {{ maxDepth := {depth} }}) [{listing}]"
    )


def compose_final_proof(
    g: SolutionHypergraph,
    lemma_forms: Mapping[int, Formalization],
    goal_form: Formalization,
    backend: ProverBackend,
    link: LinkResult,
    fact_forms: Sequence[Formalization] = (),
    import_header: str = "",
    min_chain_depth: int = 6,
    timeout: float | None = None,
) -> tuple[str, CompileResult]:
    """Emit and compile the single unit that proves the goal.

    Layout: established facts, then lemma theorems in derivation order,
    then the main theorem whose proof chains over the named results.
    The chaining depth is max(min_chain_depth, lemma count + 1): long
    chains need more depth than the default elimination search.  On
    failure with the chaining tactic, a sequential application of the
    final lemma is tried; if that fails too, CompositionCompileError.
    """
    if not link.reachable:
        raise ValueError("cannot compose a proof for a blocked graph")
    ordered: list[Formalization] = []
    for fact in fact_forms:
        if fact.status in ESTABLISHED_STATUSES:
            ordered.append(fact)
    for idx in link.derivation_order:
        f = lemma_forms.get(idx)
        if f is None:
            raise ValueError(f"no formalization for lemma {idx}")
        if f.status not in ESTABLISHED_STATUSES:
            raise ValueError(f"lemma {idx} is not established (status={f.status})")
        ordered.append(f)

    names = [f.name for f in ordered]
    depth = max(min_chain_depth, len(link.derivation_order) + 1)
    last_name = ordered[-1].name if ordered else goal_form.name

    def render(proof: str) -> str:
        segments = []
        if import_header.strip():
            segments.append(import_header.rstrip())
        for f in ordered:
            body = "sorry" if f.status == ACCEPTED_WITHOUT_PROOF else (f.proof_code or "sorry")
            segments.append(f"theorem {f.name} : {f.code} := {body}")
        segments.append(f"theorem {goal_form.name} : {goal_form.code} := {proof}")
        return "\n\n".join(segments) + "\n"

    attempts = [
        render(_chain_tactic(names, depth)),
        render(_sequential_tactic(names, last_name, depth)),
    ]
    last_result: CompileResult | None = None
    for unit in attempts:
        result = backend.check_compile(unit, timeout=timeout)
        if result.ok:
            return unit, result
        last_result = result
    raise CompositionCompileError(
        "linked unit failed to compile",
        diagnostics=last_result.diagnostics if last_result else (),
        unit=attempts[-1],
    )


def describe_hypergraph(g: SolutionHypergraph) -> str:
    """Plain-text export for graph visualization tooling."""
    lines = []
    for sid in sorted(g.nodes):
        node = g.nodes[sid]
        label = node.kind if node.index is None else f"{node.kind} {node.index}"
        marker = " <- GOAL" if sid == g.goal_sid else ""
        lines.append(f"node {sid} [{label}]: {node.statement.text}{marker}")
    for e in sorted(g.edges, key=lambda e: e.lemma_index):
        src = ", ".join(e.premises) if e.premises else "(empty)"
        lines.append(f"edge lemma {e.lemma_index}: {src} -> {e.conclusion}")
    return "\n".join(lines)
