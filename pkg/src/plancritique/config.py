"""Experiment configuration: a single YAML file, fully round-trippable.

Relative paths inside the file are resolved against the file's directory.
See ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .agents import AgentError, LlmEndpointConfig, NoisyVerifierConfig
from .orchestrator import ExperimentMode, LoopConfig

__all__ = ["AgentConfig", "ConfigError", "RunConfig", "SuiteConfig", "load_config"]

GENERATOR_KINDS = ("llm", "scripted")
VERIFIER_KINDS = ("sound", "noisy", "llm", "scripted", "none")

_MODE_VERIFIERS = {
    ExperimentMode.GENERATOR_ONLY: ("none",),
    ExperimentMode.LLM_PLUS_LLM: ("llm", "scripted"),
    ExperimentMode.LLM_PLUS_SOUND: ("sound",),
    ExperimentMode.LLM_PLUS_NOISY: ("noisy",),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SuiteConfig:
    count: int = 100
    n_blocks: int = 4
    master_seed: int = 0
    dir: str | None = None  # a directory written by `plancritique gen`; overrides the fields above


@dataclass(frozen=True)
class AgentConfig:
    kind: str
    endpoint: LlmEndpointConfig | None = None
    script: str | None = None
    strict: bool = False
    noisy: NoisyVerifierConfig | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.endpoint is not None:
            d["endpoint"] = dict(vars(self.endpoint))
        if self.script is not None:
            d["script"] = self.script
            d["strict"] = self.strict
        if self.noisy is not None:
            d.update(fpr=self.noisy.fpr, fnr=self.noisy.fnr, seed=self.noisy.seed)
        return d

    @classmethod
    def from_dict(cls, d: dict, role: str) -> AgentConfig:
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError(f"agents.{role}: expected a mapping with 'kind'")
        kind = d["kind"]
        allowed = GENERATOR_KINDS if role == "generator" else VERIFIER_KINDS
        if kind not in allowed:
            raise ConfigError(f"agents.{role}.kind must be one of {allowed}, got {kind!r}")
        endpoint = script = noisy = None
        if kind == "llm":
            if "endpoint" not in d:
                raise ConfigError(f"agents.{role}: kind 'llm' needs an 'endpoint' mapping")
            try:
                endpoint = LlmEndpointConfig(**d["endpoint"])
            except TypeError as exc:
                raise ConfigError(f"agents.{role}.endpoint: {exc}") from None
        elif kind == "scripted":
            if "script" not in d:
                raise ConfigError(f"agents.{role}: kind 'scripted' needs a 'script' path")
            script = str(d["script"])
        elif kind == "noisy":
            try:
                noisy = NoisyVerifierConfig(float(d["fpr"]), float(d["fnr"]), int(d.get("seed", 0)))
            except KeyError as exc:
                raise ConfigError(f"agents.{role}: kind 'noisy' needs {exc}") from None
        return cls(kind, endpoint, script, bool(d.get("strict", False)), noisy)


@dataclass(frozen=True)
class RunConfig:
    suite: SuiteConfig
    loop: LoopConfig
    generator: AgentConfig
    verifier: AgentConfig
    output_dir: str
    parallelism: int = 1
    template_dir: str | None = None
    record_timing: bool = True
    report_format: str = "markdown"
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        allowed = _MODE_VERIFIERS[self.loop.mode]
        if self.verifier.kind not in allowed:
            raise ConfigError(
                f"mode {self.loop.mode.value} needs a verifier of kind {' or '.join(allowed)}, got {self.verifier.kind!r}"
            )
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.report_format not in ("markdown", "csv"):
            raise ConfigError("report_format must be 'markdown' or 'csv'")

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else (self.base_dir / p)

    def to_dict(self) -> dict:
        suite = {k: v for k, v in vars(self.suite).items() if v is not None}
        return {
            "suite": suite,
            "loop": self.loop.to_dict(),
            "agents": {"generator": self.generator.to_dict(), "verifier": self.verifier.to_dict()},
            "parallelism": self.parallelism,
            "output_dir": self.output_dir,
            "template_dir": self.template_dir,
            "record_timing": self.record_timing,
            "report_format": self.report_format,
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def experiment_id(self) -> str:
        """Digest of everything that determines results (parallelism and paths excluded)."""
        d = self.to_dict()
        for k in ("parallelism", "output_dir", "report_format"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> RunConfig:
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        known = {"suite", "loop", "agents", "parallelism", "output_dir", "template_dir", "record_timing", "report_format"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            suite = SuiteConfig(**(d.get("suite") or {}))
        except TypeError as exc:
            raise ConfigError(f"suite: {exc}") from None
        try:
            loop = LoopConfig.from_dict(d["loop"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"loop: {exc}") from None
        agents = d.get("agents") or {}
        if "generator" not in agents:
            raise ConfigError("agents.generator is required")
        generator = AgentConfig.from_dict(agents["generator"], "generator")
        verifier = AgentConfig.from_dict(agents.get("verifier", {"kind": "none"}), "verifier")
        if "output_dir" not in d:
            raise ConfigError("output_dir is required")
        return cls(
            suite=suite,
            loop=loop,
            generator=generator,
            verifier=verifier,
            output_dir=str(d["output_dir"]),
            parallelism=int(d.get("parallelism", 1)),
            template_dir=d.get("template_dir"),
            record_timing=bool(d.get("record_timing", True)),
            report_format=str(d.get("report_format", "markdown")),
            base_dir=Path(base_dir),
        )

    def check_credentials(self) -> None:
        """Fail fast when an LLM agent's API key is missing."""
        for role, agent in (("generator", self.generator), ("verifier", self.verifier)):
            if agent.kind == "llm":
                try:
                    agent.endpoint.api_key()
                except AgentError as exc:
                    raise ConfigError(f"agents.{role}: {exc}") from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(data, base_dir=path.parent)
