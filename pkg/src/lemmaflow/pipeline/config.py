"""Pipeline configuration: agent endpoints, backend, budgets, options."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

from ..agents import AgentClient, AgentEndpoint, AgentRole, HttpTransport, MockTransport
from ..agents.client import default_endpoints
from ..agents.prompts import TemplateRegistry
from ..backend import LeanBackend, ProverBackend, StubBackend


class ConfigError(Exception):
    pass


@dataclass
class AgentsConfig:
    transport: str = "mock"  # "mock" | "http"
    mock_script: str | None = None
    inline_script: dict | None = None
    synthesize_missing: bool = False
    endpoints: dict[str, dict[str, Any]] = field(default_factory=dict)
    max_inflight_llm_calls: int = 4
    template_dir: str | None = None


@dataclass
class BackendConfig:
    kind: str = "stub"  # "stub" | "lean"
    script: str | None = None
    inline_script: list | None = None
    default_status: str = "ok"
    toolchain_root: str | None = None
    import_header: str = "import Mathlib"
    compile_timeout: float = 60.0
    max_concurrent_compiles: int = 2
    incomplete_markers: tuple[str, ...] = ("sorry", "admit")
    trivial_tactic: str = "by first | norm_num | decide | simp"


@dataclass
class PipelineConfig:
    agents: AgentsConfig = field(default_factory=AgentsConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    prover_retries: int = 2
    trivial_check_budget: float = 30.0
    intro_variables: str = "on"  # "on" | "off" | "both"
    min_chain_depth: int = 6
    rewrite_rules: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.intro_variables not in ("on", "off", "both"):
            raise ConfigError(f"intro_variables must be on/off/both, got {self.intro_variables!r}")
        if self.prover_retries < 0:
            raise ConfigError("prover_retries must be >= 0")

    # ------------------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict[str, Any], base_dir: Path | None = None) -> "PipelineConfig":
        agents_d = dict(d.get("agents", {}))
        backend_d = dict(d.get("backend", {}))
        pipeline_d = dict(d.get("pipeline", {}))
        if base_dir is not None:
            for key in ("mock_script",):
                if agents_d.get(key):
                    agents_d[key] = str((base_dir / agents_d[key]).resolve())
            for key in ("script", "toolchain_root"):
                if backend_d.get(key):
                    backend_d[key] = str((base_dir / backend_d[key]).resolve())
        if "incomplete_markers" in backend_d:
            backend_d["incomplete_markers"] = tuple(backend_d["incomplete_markers"])
        cfg = cls(
            agents=AgentsConfig(**agents_d),
            backend=BackendConfig(**backend_d),
            **{
                k: v
                for k, v in pipeline_d.items()
                if k in ("prover_retries", "trivial_check_budget", "intro_variables",
                         "min_chain_depth", "rewrite_rules")
            },
        )
        cfg.rewrite_rules = [tuple(r) for r in cfg.rewrite_rules]
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict[str, Any]:
        return {
            "agents": asdict(self.agents),
            "backend": asdict(self.backend),
            "pipeline": {
                "prover_retries": self.prover_retries,
                "trivial_check_budget": self.trivial_check_budget,
                "intro_variables": self.intro_variables,
                "min_chain_depth": self.min_chain_depth,
                "rewrite_rules": [list(r) for r in self.rewrite_rules],
            },
        }

    # ------------------------------------------------------------------

    def build_endpoints(self) -> dict[AgentRole, AgentEndpoint]:
        endpoints = default_endpoints()
        for role_name, overrides in self.agents.endpoints.items():
            role = AgentRole(role_name)
            base = endpoints[role]
            endpoints[role] = AgentEndpoint(
                role=role,
                base_url=overrides.get("base_url", base.base_url),
                model_name=overrides.get("model_name", base.model_name),
                max_retries=overrides.get("max_retries", base.max_retries),
                timeout=overrides.get("timeout", base.timeout),
                sampling=overrides.get("sampling", base.sampling),
            )
        return endpoints

    def build_agent_client(self, clock=None, sleeper=None, rng=None) -> AgentClient:
        if self.agents.transport == "mock":
            script = self.agents.inline_script
            if script is None and self.agents.mock_script:
                script = json.loads(Path(self.agents.mock_script).read_text(encoding="utf-8"))
            transport = MockTransport(script or {}, synthesize_missing=self.agents.synthesize_missing)
            # scripted runs never benefit from real waiting
            sleeper = sleeper or (lambda _s: None)
            rng = rng or random.Random(0)
        elif self.agents.transport == "http":
            transport = HttpTransport()
        else:
            raise ConfigError(f"unknown agent transport {self.agents.transport!r}")
        kwargs: dict[str, Any] = {
            "registry": TemplateRegistry(self.agents.template_dir),
            "max_inflight": self.agents.max_inflight_llm_calls,
        }
        if sleeper is not None:
            kwargs["sleeper"] = sleeper
        if rng is not None:
            kwargs["rng"] = rng
        if clock is not None:
            kwargs["clock"] = clock
        return AgentClient(self.build_endpoints(), transport, **kwargs)

    def build_backend(self) -> ProverBackend:
        if self.backend.kind == "stub":
            script = self.backend.inline_script
            if script is None and self.backend.script:
                script = json.loads(Path(self.backend.script).read_text(encoding="utf-8"))
            return StubBackend(
                script or [],
                default_status=self.backend.default_status,
                timeout=self.backend.compile_timeout,
            )
        if self.backend.kind == "lean":
            return LeanBackend(
                toolchain_root=self.backend.toolchain_root,
                import_header=self.backend.import_header,
                timeout=self.backend.compile_timeout,
                max_concurrent_compiles=self.backend.max_concurrent_compiles,
            )
        raise ConfigError(f"unknown backend kind {self.backend.kind!r}")
