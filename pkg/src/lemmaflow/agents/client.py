"""Agent call layer: transports, retry policy, response extraction.

Two transports share one contract: an HTTP client speaking the common
chat-completion JSON shape, and a scriptable mock keyed by prompt hash
for hermetic tests and replays.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
from pathlib import Path
from typing import Callable, Mapping, Protocol

import requests

from ..solution import Statement, VariableDecl
from .core import AgentEndpoint, AgentError, AgentRole, AgentTranscript, PromptOptions, TransportFailure
from .prompts import TemplateRegistry, render_prompt

BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_JITTER = 0.2


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Transport(Protocol):
    def send(self, endpoint: AgentEndpoint, prompt: str) -> str: ...


class HttpTransport:
    """POSTs the open chat-completion wire shape to any local server."""

    def __init__(self, session: requests.Session | None = None):
        self._session = session or requests.Session()

    def send(self, endpoint: AgentEndpoint, prompt: str) -> str:
        body = {
            "model": endpoint.model_name,
            "messages": [{"role": "user", "content": prompt}],
        }
        body.update(endpoint.sampling)
        try:
            resp = self._session.post(endpoint.base_url, json=body, timeout=endpoint.timeout)
        except requests.Timeout as exc:
            raise TransportFailure("timeout", str(exc)) from exc
        except requests.RequestException as exc:
            raise TransportFailure("transport", str(exc)) from exc
        if resp.status_code != 200:
            raise TransportFailure("transport", f"HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportFailure("transport", f"malformed response: {exc}") from exc


class MockTransport:
    """Scripted responses keyed by prompt hash, role, or wildcard.

    Script shape: ``{"<sha256>": [entry, ...], "translator": [...],
    "*": [entry, ...]}``.  An entry is a plain string, or an object
    ``{"error": "timeout"}`` / ``{"error": "transport"}`` /
    ``{"text": "..."}``.  Entries are consumed in order; the last one
    repeats.  Lookup order: exact prompt hash, then the calling role's
    name, then ``"*"``.  With ``synthesize_missing`` a deterministic
    placeholder derived from the prompt hash is produced for unmatched
    prompts instead of failing.
    """

    def __init__(self, script: Mapping[str, list] | None = None, synthesize_missing: bool = False):
        self._script = {k: list(v) for k, v in (script or {}).items()}
        self._cursor: dict[str, int] = {}
        self._synthesize = synthesize_missing
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, synthesize_missing: bool = False) -> "MockTransport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data, synthesize_missing=synthesize_missing)

    def _next_entry(self, key: str):
        entries = self._script[key]
        with self._lock:
            i = self._cursor.get(key, 0)
            self._cursor[key] = i + 1
        return entries[min(i, len(entries) - 1)]

    def send(self, endpoint: AgentEndpoint, prompt: str) -> str:
        h = prompt_hash(prompt)
        if h in self._script:
            entry = self._next_entry(h)
        elif endpoint.role.value in self._script:
            entry = self._next_entry(endpoint.role.value)
        elif "*" in self._script:
            entry = self._next_entry("*")
        elif self._synthesize:
            return f"```\nSTMT_{h[:12]}\n```"
        else:
            raise TransportFailure("transport", f"no scripted response for prompt {h[:12]}")
        if isinstance(entry, str):
            return entry
        if "error" in entry:
            kind = "timeout" if entry["error"] == "timeout" else "transport"
            raise TransportFailure(kind, "scripted failure")
        return entry.get("text", "")


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_+-]*\n(.*?)```", re.DOTALL)
_CODEISH_RE = re.compile(
    r"(?m)^\s*(theorem|lemma|example|def|import|by\b|have\b|fun\b|∀|axiom)|:="
)


def extract_code(response: str) -> str:
    """First fenced code block; else the whole response if it reads as code."""
    m = _FENCE_RE.search(response)
    if m:
        code = m.group(1).strip()
        if code:
            return code
        raise AgentError(AgentError.NO_CODE_BLOCK, "fenced block is empty")
    body = response.strip()
    if body and _CODEISH_RE.search(body):
        return body
    raise AgentError(AgentError.NO_CODE_BLOCK, "response contains no code block")


class AgentClient:
    """One client for all three roles; shareable across sessions.

    Retries transport failures with exponential backoff (base 1 s,
    factor 2, jitter +-20%); the sleeper, RNG and clock are injectable
    so tests run instantly and deterministically.  Every call is
    recorded as a transcript, success or not.
    """

    def __init__(
        self,
        endpoints: Mapping[AgentRole, AgentEndpoint],
        transport: Transport,
        registry: TemplateRegistry | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        clock: Callable[[], float] = time.perf_counter,
        max_inflight: int = 4,
    ):
        self.endpoints = dict(endpoints)
        self.transport = transport
        self.registry = registry or TemplateRegistry()
        self.transcripts: list[AgentTranscript] = []
        self._sleeper = sleeper
        self._rng = rng or random.Random()
        self._clock = clock
        self._sem = threading.BoundedSemaphore(max_inflight)
        self._lock = threading.Lock()
        self._counter = 0

    def _next_id(self) -> str:
        with self._lock:
            self._counter += 1
            return f"t{self._counter}"

    def render(self, role: AgentRole, payload: dict, opts: PromptOptions) -> str:
        return render_prompt(role, payload, opts, registry=self.registry)

    def call(self, role: AgentRole, prompt: str) -> AgentTranscript:
        """Send, retrying transport failures up to the endpoint budget."""
        endpoint = self.endpoints[role]
        started = self._clock()
        attempt = 0
        last_failure: TransportFailure | None = None
        response: str | None = None
        while attempt <= endpoint.max_retries:
            attempt += 1
            try:
                with self._sem:
                    response = self.transport.send(endpoint, prompt)
                last_failure = None
                break
            except TransportFailure as failure:
                last_failure = failure
                if attempt <= endpoint.max_retries:
                    delay = BACKOFF_BASE * (BACKOFF_FACTOR ** (attempt - 1))
                    delay *= 1.0 + self._rng.uniform(-BACKOFF_JITTER, BACKOFF_JITTER)
                    self._sleeper(delay)
        latency = self._clock() - started
        transcript = AgentTranscript(
            transcript_id=self._next_id(),
            role=role,
            prompt=prompt,
            response=response,
            attempt=attempt,
            latency=latency,
            error=last_failure.kind if last_failure else None,
        )
        self.transcripts.append(transcript)
        if last_failure is not None:
            kind = AgentError.TIMEOUT if last_failure.kind == "timeout" else AgentError.TRANSPORT
            raise AgentError(kind, f"{role.value} call failed after {attempt} attempts")
        if response is None or not response.strip():
            raise AgentError(AgentError.EMPTY_RESPONSE, f"{role.value} returned an empty response")
        return transcript

    # ------------------------------------------------------------------
    # role wrappers
    # ------------------------------------------------------------------

    def solve(self, problem_text: str, opts: PromptOptions) -> tuple[str, AgentTranscript]:
        """Ask the solver for a structured solution; returns raw text."""
        prompt = self.render(AgentRole.SOLVER, {"problem_text": problem_text}, opts)
        transcript = self.call(AgentRole.SOLVER, prompt)
        return transcript.response.strip(), transcript

    def formalize(
        self,
        stmt: Statement,
        hypotheses: list[Statement],
        variables: list[VariableDecl],
        opts: PromptOptions,
    ) -> tuple[str, AgentTranscript]:
        """Translate one statement into formal code (first code block)."""
        prompt = self.render(
            AgentRole.TRANSLATOR,
            {"statement_text": stmt.text, "hypotheses": hypotheses, "variables": variables},
            opts,
        )
        transcript = self.call(AgentRole.TRANSLATOR, prompt)
        return extract_code(transcript.response), transcript

    def prove(
        self,
        goal_code: str,
        hypothesis_codes: list[str],
        opts: PromptOptions,
    ) -> tuple[str, AgentTranscript]:
        """Ask the prover for proof code for an already-formalized goal."""
        prompt = self.render(
            AgentRole.PROVER,
            {"goal_code": goal_code, "hypothesis_codes": hypothesis_codes},
            opts,
        )
        transcript = self.call(AgentRole.PROVER, prompt)
        return extract_code(transcript.response), transcript


def default_endpoints(
    base_url: str = "http://127.0.0.1:8080/v1/chat/completions",
) -> dict[AgentRole, AgentEndpoint]:
    """Reasonable defaults: deterministic translator, warm prover."""
    return {
        AgentRole.SOLVER: AgentEndpoint(
            role=AgentRole.SOLVER, base_url=base_url, model_name="solver",
            sampling={"temperature": 0.7, "max_tokens": 2048},
        ),
        AgentRole.TRANSLATOR: AgentEndpoint(
            role=AgentRole.TRANSLATOR, base_url=base_url, model_name="translator",
            sampling={"temperature": 0.0, "max_tokens": 1024},
        ),
        AgentRole.PROVER: AgentEndpoint(
            role=AgentRole.PROVER, base_url=base_url, model_name="prover",
            sampling={"temperature": 0.6, "max_tokens": 2048},
        ),
    }
