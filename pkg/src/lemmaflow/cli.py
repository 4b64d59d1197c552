"""`verify` command line: single runs, batches, A/B diffs, the server."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bench import ab_compare, compute_metrics, load_dataset, run_answer_baseline, run_batch
from .pipeline import (
    Decision,
    EventLog,
    MODE_INTERACTIVE,
    PipelineConfig,
    VerificationSession,
    build_report,
    new_session_id,
    render_text,
    run_automatic,
)
from .solution import ProblemStatement


def _load_config(path: str | None) -> PipelineConfig:
    return PipelineConfig.from_file(path) if path else PipelineConfig()


def _load_problem(path: str) -> ProblemStatement:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return ProblemStatement.from_dict(data)


@click.group()
def main() -> None:
    """Verify natural-language math solutions against a proof assistant."""


@main.command("run")
@click.option("--problem", "problem_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["auto", "interactive"]), default="auto")
@click.option("--intro-vars", type=click.Choice(["on", "off", "both"]), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--report-out", type=click.Path(), default=None)
def run_cmd(problem_path, mode, intro_vars, config_path, report_out) -> None:
    """Verify one problem; prints the rendered report."""
    cfg = _load_config(config_path)
    if intro_vars:
        cfg.intro_variables = intro_vars
    problem = _load_problem(problem_path)
    if mode == "auto":
        report = run_automatic(problem, cfg)
    else:
        if cfg.intro_variables == "both":
            raise click.UsageError("interactive mode runs a single pass; pick on or off")
        report = _run_interactive(problem, cfg)
    click.echo(render_text(report))
    if report_out:
        Path(report_out).write_text(report.canonical_json(), encoding="utf-8")
        click.echo(f"report written to {report_out}")
    sys.exit(0 if report.verdict["kind"] in ("Verified", "VerifiedTrivial") else 1)


def _run_interactive(problem, cfg):
    """Terminal adjudication loop: prompt the user at every failure."""
    session = VerificationSession(
        session_id=new_session_id(),
        problem=problem,
        cfg=cfg,
        mode=MODE_INTERACTIVE,
        intro_variables=cfg.intro_variables == "on",
        agents=cfg.build_agent_client(),
        backend=cfg.build_backend(),
        log=EventLog(),
    )
    while not session.finished:
        session.run_until_pause()
        if session.finished:
            break
        context = session.context
        click.echo("\n--- decision needed: " + context["kind"] + " ---")
        click.echo(f"statement: {context['statement']}")
        if context.get("code"):
            click.echo(f"code:      {context['code']}")
        for diag in context.get("diagnostics", []):
            click.echo(f"  {diag['severity']}: {diag['message']}")
        legal = context["legal"]
        for i, name in enumerate(legal, start=1):
            click.echo(f"  {i}. {name}")
        choice = click.prompt("choose", type=click.IntRange(1, len(legal)))
        decision_type = legal[choice - 1]
        code = None
        if decision_type in ("ProvideTranslation", "ProvideFormalization"):
            click.echo("enter replacement code, end with a single '.' line:")
            lines = []
            while True:
                line = input()
                if line.strip() == ".":
                    break
                lines.append(line)
            code = "\n".join(lines)
        session.apply_decision(Decision(type=decision_type, code=code))
    return build_report(session)


@main.command("batch")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--runs", "n_runs", type=int, default=1)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--include-trivial", is_flag=True, default=False,
              help="count VerifiedTrivial as a positive prediction")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--baseline", is_flag=True, default=False,
              help="run the answer-only baseline instead of the full pipeline")
def batch_cmd(dataset_path, n_runs, config_path, include_trivial, out_path, baseline) -> None:
    """Verify a labeled JSONL dataset and print metrics."""
    cfg = _load_config(config_path)
    records = load_dataset(dataset_path)
    if baseline:
        flat = run_answer_baseline(records, cfg)
        verdicts = [[v] for v in flat]
    else:
        verdicts = run_batch(
            records,
            cfg,
            n_runs=n_runs,
            progress=lambda pid, run, kind: click.echo(f"{pid} run {run + 1}: {kind}", err=True),
        )
    metrics = compute_metrics(verdicts, [r.label for r in records], include_trivial=include_trivial)
    payload = {
        "dataset": str(dataset_path),
        "n_runs": metrics.n_runs,
        "metrics": metrics.to_dict(),
        "verdicts": {rec.problem.id: row for rec, row in zip(records, verdicts)},
    }
    blob = json.dumps(payload, sort_keys=True, indent=2)
    click.echo(blob)
    if out_path:
        Path(out_path).write_text(blob, encoding="utf-8")


@main.command("ab")
@click.option("--run-a", "run_a_path", required=True, type=click.Path(exists=True))
@click.option("--run-b", "run_b_path", required=True, type=click.Path(exists=True))
@click.option("--include-trivial", is_flag=True, default=False)
@click.option("--out", "out_path", type=click.Path(), default=None)
def ab_cmd(run_a_path, run_b_path, include_trivial, out_path) -> None:
    """Compare two batch outputs over the same problems."""

    def load_run(path):
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        verdicts = data.get("verdicts", data)
        return {pid: (row[0] if isinstance(row, list) else row) for pid, row in verdicts.items()}

    comparison = ab_compare(load_run(run_a_path), load_run(run_b_path), include_trivial=include_trivial)
    blob = json.dumps(comparison.to_dict(), sort_keys=True, indent=2)
    click.echo(blob)
    if out_path:
        Path(out_path).write_text(blob, encoding="utf-8")


@main.command("serve")
@click.option("--port", type=int, default=8077)
@click.option("--bind", default="127.0.0.1", help="interface to bind; no auth, keep it local")
@click.option("--data-dir", default="./verify-data", type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              envvar="VERIFY_CONFIG")
@click.option("--ui-dir", type=click.Path(), default=None)
def serve_cmd(port, bind, data_dir, config_path, ui_dir) -> None:
    """Run the HTTP server (sessions, events, reports, batches)."""
    import uvicorn

    from .server import build_app

    cfg = _load_config(config_path)
    app = build_app(cfg, data_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=bind, port=port, log_level="warning")


if __name__ == "__main__":
    main()
