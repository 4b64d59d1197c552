"""Scriptable backend: fixed results keyed by code content.

A script is a JSON list of entries::

    {"code_sha256": "<hex>", "status": "ok"|"error",
     "diagnostics": [{"severity", "line", "column", "message"}],
     "elapsed": 0.01, "sleep": 0}

Entries may match by exact ``code_sha256`` or, as a convenience for
scripting generated units, by ``match_substring``.  The first matching
entry wins; unmatched code falls back to ``default_status``.  A
scripted ``sleep`` longer than the compile timeout yields the same
Timeout error the real driver would produce, without actually waiting.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

from .core import CompileResult, Diagnostic, ProverBackend


def code_hash(code: str) -> str:
    return hashlib.sha256(code.encode("utf-8")).hexdigest()


class StubBackend(ProverBackend):
    name = "stub"

    def __init__(
        self,
        script: Iterable[dict[str, Any]] | None = None,
        default_status: str = "ok",
        timeout: float = 60.0,
    ):
        self.entries = list(script or [])
        self.default_status = default_status
        self.timeout = timeout
        self.calls: list[str] = []  # compiled code units, in order

    @classmethod
    def from_file(cls, path: str | Path, default_status: str = "ok", timeout: float = 60.0) -> "StubBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data, default_status=default_status, timeout=timeout)

    def _match(self, code: str) -> dict[str, Any] | None:
        h = code_hash(code)
        for entry in self.entries:
            if entry.get("code_sha256") == h:
                return entry
            sub = entry.get("match_substring")
            if sub and sub in code:
                return entry
        return None

    def check_compile(self, code: str, timeout: float | None = None) -> CompileResult:
        self.calls.append(code)
        budget = timeout if timeout is not None else self.timeout
        entry = self._match(code)
        if entry is None:
            status = "Ok" if self.default_status.lower() == "ok" else "Error"
            diags = () if status == "Ok" else (Diagnostic("error", 0, 0, "scripted default failure"),)
            return CompileResult(status=status, diagnostics=diags, elapsed=0.01)
        took = float(entry.get("sleep", entry.get("elapsed", 0.01)))
        if took > budget:
            return CompileResult(
                status="Error",
                diagnostics=(Diagnostic("error", 0, 0, f"Timeout after {budget:.0f}s"),),
                elapsed=budget,
            )
        diagnostics = tuple(Diagnostic.from_dict(d) for d in entry.get("diagnostics", []))
        status = "Ok" if entry.get("status", "ok").lower() == "ok" else "Error"
        if status == "Error" and not any(d.severity == "error" for d in diagnostics):
            diagnostics = diagnostics + (Diagnostic("error", 0, 0, "scripted failure"),)
        return CompileResult(status=status, diagnostics=diagnostics, elapsed=float(entry.get("elapsed", 0.01)))
