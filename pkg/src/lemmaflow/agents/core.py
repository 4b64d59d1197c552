"""Shared types for the three LLM roles."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..solution import Statement


class AgentRole(str, Enum):
    SOLVER = "solver"
    TRANSLATOR = "translator"
    PROVER = "prover"


@dataclass(frozen=True)
class AgentEndpoint:
    """Where and how to reach one model.  Any chat-completion server works."""

    role: AgentRole
    base_url: str = ""
    model_name: str = ""
    max_retries: int = 2
    timeout: float = 60.0
    sampling: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


@dataclass(frozen=True)
class PromptOptions:
    """Prompt-shaping knobs shared by all roles.

    introduce_variables switches the solver to the template that forces
    a typed VARIABLES block; extra_context carries prior conclusions.
    """

    introduce_variables: bool = False
    extra_context: tuple[Statement, ...] = ()


@dataclass
class AgentTranscript:
    """One completed (or failed) call: prompt, response, attempts, timing."""

    transcript_id: str
    role: AgentRole
    prompt: str
    response: str | None
    attempt: int
    latency: float
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "transcript_id": self.transcript_id,
            "role": self.role.value,
            "prompt": self.prompt,
            "response": self.response,
            "attempt": self.attempt,
            "latency": self.latency,
            "error": self.error,
        }


class TransportFailure(Exception):
    """Low-level send failure; the client retries these."""

    def __init__(self, kind: str, message: str = ""):
        super().__init__(message or kind)
        self.kind = kind  # "timeout" | "transport"


class AgentError(Exception):
    """A call failed for good: retries exhausted or response unusable."""

    TIMEOUT = "timeout"
    TRANSPORT = "transport"
    EMPTY_RESPONSE = "empty_response"
    NO_CODE_BLOCK = "no_code_block"

    def __init__(self, kind: str, message: str = ""):
        super().__init__(message or kind)
        self.kind = kind
