from .core import (
    ACCEPTED_WITHOUT_PROOF,
    COMPILE_ERROR,
    COMPILE_OK,
    ESTABLISHED_STATUSES,
    PROOF_FAILED,
    PROVED_OK,
    UNCHECKED,
    BackendUnavailable,
    CompileResult,
    Diagnostic,
    Formalization,
    ProverBackend,
    assemble_unit,
    attempt_proof,
    check_statement,
    contains_incomplete_marker,
    proposition_of,
    render_theorem,
    strip_comments_and_strings,
    trivial_check,
)
from .lean import LeanBackend, parse_compiler_output
from .stub import StubBackend

__all__ = [
    "ACCEPTED_WITHOUT_PROOF",
    "COMPILE_ERROR",
    "COMPILE_OK",
    "ESTABLISHED_STATUSES",
    "PROOF_FAILED",
    "PROVED_OK",
    "UNCHECKED",
    "BackendUnavailable",
    "CompileResult",
    "Diagnostic",
    "Formalization",
    "LeanBackend",
    "ProverBackend",
    "StubBackend",
    "assemble_unit",
    "attempt_proof",
    "check_statement",
    "contains_incomplete_marker",
    "parse_compiler_output",
    "proposition_of",
    "render_theorem",
    "strip_comments_and_strings",
    "trivial_check",
]
