"""Real toolchain driver: runs the compiler in a subprocess and parses
its ``file:line:col: severity: message`` output into diagnostics."""

from __future__ import annotations

import re
import shutil
import subprocess
import tempfile
import threading
import time
from pathlib import Path

from .core import BackendUnavailable, CompileResult, Diagnostic, ProverBackend

_DIAG_RE = re.compile(
    r"^(?P<file>[^:\n]+):(?P<line>\d+):(?P<col>\d+):\s*(?P<sev>error|warning|info):\s*(?P<msg>.*)$"
)


def parse_compiler_output(output: str) -> tuple[list[Diagnostic], list[str]]:
    """Line-oriented parse; unparsable lines are collected as a raw tail.

    Indented continuation lines are appended to the previous message so
    multi-line compiler explanations survive intact.
    """
    diagnostics: list[Diagnostic] = []
    tail: list[str] = []
    for line in output.splitlines():
        m = _DIAG_RE.match(line)
        if m:
            diagnostics.append(
                Diagnostic(
                    severity=m.group("sev"),
                    line=int(m.group("line")),
                    column=int(m.group("col")),
                    message=m.group("msg").strip(),
                )
            )
        elif line.startswith((" ", "\t")) and diagnostics:
            last = diagnostics[-1]
            diagnostics[-1] = Diagnostic(
                last.severity, last.line, last.column, last.message + "\n" + line.strip()
            )
        elif line.strip():
            tail.append(line)
    return diagnostics, tail


class LeanBackend(ProverBackend):
    """Drives `lean` (or `lake env lean` inside a project) on temp files."""

    name = "lean"

    def __init__(
        self,
        toolchain_root: str | Path | None = None,
        import_header: str = "",
        timeout: float = 60.0,
        max_concurrent_compiles: int = 2,
    ):
        self.toolchain_root = Path(toolchain_root) if toolchain_root else None
        self.import_header = import_header
        self.timeout = timeout
        self._sem = threading.BoundedSemaphore(max_concurrent_compiles)

    def _command(self, file: Path) -> list[str]:
        if self.toolchain_root is not None and (
            (self.toolchain_root / "lakefile.lean").exists()
            or (self.toolchain_root / "lakefile.toml").exists()
        ):
            return ["lake", "env", "lean", str(file)]
        return ["lean", str(file)]

    def available(self) -> bool:
        return shutil.which("lean") is not None

    def check_compile(self, code: str, timeout: float | None = None) -> CompileResult:
        if not self.available():
            raise BackendUnavailable("`lean` not found on PATH")
        budget = timeout if timeout is not None else self.timeout
        started = time.monotonic()
        with self._sem, tempfile.TemporaryDirectory(prefix="proofjobffi") as tmp:
            file = Path(tmp) / "Check.lean"
            file.write_text(code, encoding="utf-8")
            cwd = str(self.toolchain_root) if self.toolchain_root else tmp
            try:
                proc = subprocess.run(
                    self._command(file),
                    capture_output=True,
                    text=True,
                    timeout=budget,
                    cwd=cwd,
                )
            except subprocess.TimeoutExpired:
                elapsed = time.monotonic() - started
                return CompileResult(
                    status="Error",
                    diagnostics=(Diagnostic("error", 0, 0, f"Timeout after {budget:.0f}s"),),
                    elapsed=elapsed,
                )
            except FileNotFoundError as exc:
                raise BackendUnavailable(str(exc)) from exc
        elapsed = time.monotonic() - started
        diagnostics, tail = parse_compiler_output(proc.stdout + "\n" + proc.stderr)
        if tail:
            diagnostics.append(Diagnostic("info", 0, 0, "\n".join(tail)))
        has_errors = any(d.severity == "error" for d in diagnostics)
        if proc.returncode != 0 and not has_errors:
            diagnostics.append(
                Diagnostic("error", 0, 0, f"compiler exited with code {proc.returncode}")
            )
            has_errors = True
        return CompileResult(
            status="Error" if has_errors else "Ok",
            diagnostics=tuple(diagnostics),
            elapsed=elapsed,
        )
