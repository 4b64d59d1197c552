from .model import (
    Lemma,
    ParseError,
    Premise,
    ProblemStatement,
    Provenance,
    SourceTag,
    Statement,
    StructuredSolution,
    VariableDecl,
    Violation,
    statement_sid,
)
from .parser import parse_structured_solution, serialize_structured_solution
from .transform import (
    ClassificationError,
    NormalizationCycle,
    classify_premises,
    extract_givens,
    normalize,
    split_top_level_conjunction,
    used_variable_names,
    validate_structure,
)

__all__ = [
    "ClassificationError",
    "Lemma",
    "NormalizationCycle",
    "ParseError",
    "Premise",
    "ProblemStatement",
    "Provenance",
    "SourceTag",
    "Statement",
    "StructuredSolution",
    "VariableDecl",
    "Violation",
    "classify_premises",
    "extract_givens",
    "normalize",
    "parse_structured_solution",
    "serialize_structured_solution",
    "split_top_level_conjunction",
    "statement_sid",
    "used_variable_names",
    "validate_structure",
]
