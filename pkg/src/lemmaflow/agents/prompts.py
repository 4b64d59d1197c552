"""Prompt templates and deterministic rendering.

Templates are plain text files with ``{named}`` placeholders, one per
(role, variables-mode) pair, kept in the package's templates directory
so operators can swap them without touching code (point
``template_dir`` at a copy).
"""

from __future__ import annotations

from pathlib import Path

from ..solution import Statement, VariableDecl
from .core import AgentRole, PromptOptions

_DEFAULT_DIR = Path(__file__).parent / "templates"


class MissingTemplate(Exception):
    def __init__(self, role: AgentRole, variant: str):
        super().__init__(f"no template for role={role.value} variant={variant}")
        self.role = role
        self.variant = variant


class TemplateRegistry:
    def __init__(self, template_dir: str | Path | None = None):
        self._dir = Path(template_dir) if template_dir else _DEFAULT_DIR
        self._cache: dict[str, str] = {}

    def get(self, role: AgentRole, introduce_variables: bool) -> str:
        variant = "vars_on" if introduce_variables else "vars_off"
        key = f"{role.value}.{variant}"
        if key not in self._cache:
            path = self._dir / f"{key}.txt"
            if not path.exists():
                raise MissingTemplate(role, variant)
            self._cache[key] = path.read_text(encoding="utf-8")
        return self._cache[key]


def _numbered_block(statements: tuple[Statement, ...] | list[Statement]) -> str:
    if not statements:
        return "(none)"
    return "\n".join(f"{i}. {s.text}" for i, s in enumerate(statements, start=1))


def _numbered_code_block(codes: list[str]) -> str:
    if not codes:
        return "(none)"
    return "\n".join(f"{i}. {c}" for i, c in enumerate(codes, start=1))


def _variables_block(variables: list[VariableDecl]) -> str:
    if not variables:
        return "(none)"
    return "\n".join(f"{v.name} : {v.vartype} ({v.origin})" for v in variables)


def render_prompt(
    role: AgentRole,
    payload: dict,
    opts: PromptOptions,
    registry: TemplateRegistry | None = None,
) -> str:
    """Fill the role's template; same inputs always give the same bytes.

    Payload keys by role:
      solver:     problem_text
      translator: statement_text, variables (list[VariableDecl]),
                  hypotheses (list[Statement])
      prover:     goal_code, hypothesis_codes (list[str])
    Context statements from opts.extra_context are appended to the
    role-specific context block, preserving order.
    """
    registry = registry or TemplateRegistry()
    template = registry.get(role, opts.introduce_variables)

    if role is AgentRole.SOLVER:
        fields = {"problem_text": payload["problem_text"]}
    elif role is AgentRole.TRANSLATOR:
        hypotheses = list(payload.get("hypotheses", ())) + list(opts.extra_context)
        fields = {
            "statement_text": payload["statement_text"],
            "context_block": _numbered_block(hypotheses),
            "variables_block": _variables_block(list(payload.get("variables", ()))),
        }
    else:
        codes = list(payload.get("hypothesis_codes", ()))
        codes += [s.text for s in opts.extra_context]
        fields = {
            "goal_code": payload["goal_code"],
            "hypotheses_block": _numbered_code_block(codes),
        }
    return template.format(**fields)
