from .core import (
    AgentEndpoint,
    AgentError,
    AgentRole,
    AgentTranscript,
    PromptOptions,
    TransportFailure,
)
from .client import AgentClient, HttpTransport, MockTransport, extract_code
from .prompts import MissingTemplate, TemplateRegistry, render_prompt

__all__ = [
    "AgentClient",
    "AgentEndpoint",
    "AgentError",
    "AgentRole",
    "AgentTranscript",
    "HttpTransport",
    "MissingTemplate",
    "MockTransport",
    "PromptOptions",
    "TemplateRegistry",
    "TransportFailure",
    "extract_code",
    "render_prompt",
]
