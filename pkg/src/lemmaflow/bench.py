"""Dataset runs and metrics: confusion matrix, baseline, A/B diffs.

A labeled dataset is JSON-lines, one record per line:
``{"id", "text", "label", "answer"?, "trusted_goal"?}`` where label
true means a correct, well-explained solution should verify.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from .pipeline import PipelineConfig, VERIFIED, VERIFIED_TRIVIAL, run_automatic
from .solution import ProblemStatement, Statement
from .agents import AgentError, PromptOptions
from .backend import (
    COMPILE_OK,
    BackendUnavailable,
    Formalization,
    attempt_proof,
    check_statement,
    proposition_of,
)


class MalformedRecord(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateId(Exception):
    def __init__(self, record_id: str, line_no: int):
        super().__init__(f"duplicate id {record_id!r} at line {line_no}")
        self.record_id = record_id


class IdSetMismatch(Exception):
    pass


class EmptyInput(Exception):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    problem: ProblemStatement
    label: bool
    reference_answer: str | None = None

    def to_dict(self) -> dict[str, Any]:
        d = self.problem.to_dict()
        d["label"] = self.label
        return d


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Read a JSON-lines dataset, preserving order, rejecting duplicates."""
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except ValueError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise MalformedRecord(line_no, "record must be an object")
        for required in ("id", "text", "label"):
            if required not in raw:
                raise MalformedRecord(line_no, f"missing field {required!r}")
        if not isinstance(raw["label"], bool):
            raise MalformedRecord(line_no, "label must be a boolean")
        if raw["id"] in seen:
            raise DuplicateId(raw["id"], line_no)
        seen.add(raw["id"])
        records.append(
            DatasetRecord(
                problem=ProblemStatement(
                    id=raw["id"],
                    text=raw["text"],
                    answer=raw.get("answer"),
                    trusted_goal=raw.get("trusted_goal"),
                    label=raw["label"],
                ),
                label=raw["label"],
                reference_answer=raw.get("answer"),
            )
        )
    return records


# ---------------------------------------------------------------------------
# batch runs
# ---------------------------------------------------------------------------


def run_batch(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    n_runs: int = 1,
    progress: Callable[[str, int, str], None] | None = None,
    clock=None,
) -> list[list[str]]:
    """Run every problem n_runs times; returns verdict kinds per problem.

    Order matches the input records.  Each run builds fresh clients so
    scripted transports replay identically per run.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    out: list[list[str]] = []
    for record in records:
        verdicts: list[str] = []
        for run_idx in range(n_runs):
            report = run_automatic(record.problem, cfg, clock=clock)
            kind = report.verdict["kind"]
            verdicts.append(kind)
            if progress is not None:
                progress(record.problem.id, run_idx, kind)
        out.append(verdicts)
    return out


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass
class RunMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float | None
    recall: float | None
    uncertainty: dict[str, float | None] = field(default_factory=dict)
    n_runs: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "uncertainty": self.uncertainty,
            "n_runs": self.n_runs,
        }


def is_positive(verdict_kind: str, include_trivial: bool = False) -> bool:
    """A positive prediction means "the solution verified".

    Too-easy goals (VerifiedTrivial) are excluded by default: they are
    the false-positive-prone class, so the default posture is
    conservative; include_trivial restores inclusive counting.
    """
    if verdict_kind == VERIFIED:
        return True
    return include_trivial and verdict_kind == VERIFIED_TRIVIAL


def _confusion(predictions: Sequence[bool], labels: Sequence[bool]) -> tuple[int, int, int, int]:
    tp = sum(1 for p, l in zip(predictions, labels) if p and l)
    fp = sum(1 for p, l in zip(predictions, labels) if p and not l)
    fn = sum(1 for p, l in zip(predictions, labels) if not p and l)
    tn = sum(1 for p, l in zip(predictions, labels) if not p and not l)
    return tp, fp, fn, tn


def _safe_div(num: int, den: int) -> float | None:
    return num / den if den else None


def compute_metrics(
    verdicts: Sequence[Sequence[str]] | Sequence[str],
    labels: Sequence[bool],
    include_trivial: bool = False,
) -> RunMetrics:
    """Confusion counts and rates, aggregated over all runs.

    Counts sum over n_runs, so tp+fp+fn+tn == len(labels) * n_runs.
    The uncertainty on each rate is the sample standard deviation of
    that rate across runs (needs n_runs >= 2; otherwise absent).
    """
    if not verdicts:
        raise EmptyInput("no verdicts to score")
    if verdicts and isinstance(verdicts[0], str):
        verdicts = [[v] for v in verdicts]  # single-run convenience
    if len(verdicts) != len(labels):
        raise ValueError(f"{len(verdicts)} verdict rows vs {len(labels)} labels")
    n_runs = len(verdicts[0])
    if any(len(row) != n_runs for row in verdicts):
        raise ValueError("ragged verdict rows; every problem needs the same n_runs")

    per_run: list[dict[str, float | None]] = []
    total = [0, 0, 0, 0]
    for r in range(n_runs):
        predictions = [is_positive(row[r], include_trivial) for row in verdicts]
        tp, fp, fn, tn = _confusion(predictions, labels)
        total = [total[0] + tp, total[1] + fp, total[2] + fn, total[3] + tn]
        per_run.append(
            {
                "accuracy": (tp + tn) / len(labels),
                "precision": _safe_div(tp, tp + fp),
                "recall": _safe_div(tp, tp + fn),
            }
        )

    tp, fp, fn, tn = total
    grand = tp + fp + fn + tn
    uncertainty: dict[str, float | None] = {}
    for key in ("accuracy", "precision", "recall"):
        samples = [m[key] for m in per_run if m[key] is not None]
        uncertainty[key] = (
            statistics.stdev(samples) if len(samples) >= 2 else None
        )
    return RunMetrics(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        accuracy=(tp + tn) / grand,
        precision=_safe_div(tp, tp + fp),
        recall=_safe_div(tp, tp + fn),
        uncertainty=uncertainty,
        n_runs=n_runs,
    )


# ---------------------------------------------------------------------------
# answer-only baseline
# ---------------------------------------------------------------------------


def run_answer_baseline(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    clock=None,
) -> list[str]:
    """Structure-free pipeline: formalize the whole problem, prove once.

    The solver's informal output is passed to the prover as a hint; the
    verdict is Verified iff that single proof attempt compiles clean.
    Used as the comparison point for answer-checking style runs.
    """
    verdicts: list[str] = []
    for record in records:
        agents = cfg.build_agent_client(clock=clock)
        backend = cfg.build_backend()
        header = cfg.backend.import_header
        try:
            hint, _ = agents.solve(record.problem.text, PromptOptions())
            if record.problem.trusted_goal:
                goal_code = proposition_of(record.problem.trusted_goal)
            else:
                goal_code, _ = agents.formalize(
                    Statement.of(record.problem.text), [], [], PromptOptions()
                )
                goal_code = proposition_of(goal_code)
            form = Formalization(name="answer_goal", source_sid="baseline", code=goal_code)
            form, compile_result = check_statement(backend, form, import_header=header)
            if form.status != COMPILE_OK:
                verdicts.append("Refuted")
                continue
            proof, _ = agents.prove(
                form.code, [], PromptOptions(extra_context=(Statement.of(hint),))
            )
            proved, _ = attempt_proof(
                backend, form, [], proof,
                import_header=header, markers=cfg.backend.incomplete_markers,
            )
            verdicts.append(VERIFIED if proved.status == "ProvedOk" else "Refuted")
        except (AgentError, BackendUnavailable):
            verdicts.append("Inconclusive")
    return verdicts


# ---------------------------------------------------------------------------
# A/B comparison
# ---------------------------------------------------------------------------


@dataclass
class ABComparison:
    pairs: list[dict[str, str]]
    both: int
    a_only: int
    b_only: int
    neither: int
    regressions: list[str]   # verified in A, not in B
    improvements: list[str]  # verified in B, not in A

    def to_dict(self) -> dict[str, Any]:
        return {
            "pairs": self.pairs,
            "both": self.both,
            "a_only": self.a_only,
            "b_only": self.b_only,
            "neither": self.neither,
            "regressions": self.regressions,
            "improvements": self.improvements,
        }


def ab_compare(
    run_a: dict[str, str],
    run_b: dict[str, str],
    include_trivial: bool = False,
) -> ABComparison:
    """Paired verdict diff over the identical problem id set."""
    if set(run_a) != set(run_b):
        only_a = sorted(set(run_a) - set(run_b))[:5]
        only_b = sorted(set(run_b) - set(run_a))[:5]
        raise IdSetMismatch(f"id sets differ; a-only {only_a}, b-only {only_b}")
    pairs = []
    both = a_only = b_only = neither = 0
    regressions: list[str] = []
    improvements: list[str] = []
    for pid in sorted(run_a):
        a, b = run_a[pid], run_b[pid]
        pairs.append({"id": pid, "a": a, "b": b})
        pa, pb = is_positive(a, include_trivial), is_positive(b, include_trivial)
        if pa and pb:
            both += 1
        elif pa:
            a_only += 1
            regressions.append(pid)
        elif pb:
            b_only += 1
            improvements.append(pid)
        else:
            neither += 1
    return ABComparison(
        pairs=pairs,
        both=both,
        a_only=a_only,
        b_only=b_only,
        neither=neither,
        regressions=regressions,
        improvements=improvements,
    )
