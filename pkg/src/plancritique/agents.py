"""Generator and verifier agents.

A *generator* turns a :class:`PromptBundle` into response text. A
*verifier* judges a plan and returns a verdict plus feedback text; only the
sound verifier's verdict is guaranteed correct.

Wire protocol of :class:`ChatClient` (any compatible service works)::

    POST {base_url}/chat/completions
    Authorization: Bearer $API_KEY
    {"model": ..., "messages": [{"role": "system", ...}, {"role": "user", ...}],
     "temperature": 0}
    -> {"choices": [{"message": {"content": "..."}}]}
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from .pddl import Domain, Plan, Problem
from .promptgen import (
    PromptBundle,
    Templates,
    parse_verifier_response,
    verification_prompt,
)
from .validator import INVALID_TEXT, FeedbackLevel, check, feedback_to_text

__all__ = [
    "AgentError",
    "ChatClient",
    "Generator",
    "Judgement",
    "LlmEndpointConfig",
    "LlmVerifier",
    "NoisyVerifier",
    "NoisyVerifierConfig",
    "PromptMismatch",
    "ScriptExhausted",
    "ScriptedGenerator",
    "SoundVerifier",
    "Verifier",
    "load_script",
    "scripted_agent",
]

log = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


class AgentError(RuntimeError):
    """An agent could not produce a response."""


class ScriptExhausted(AgentError):
    pass


class PromptMismatch(AgentError):
    pass


class Generator(Protocol):
    def __call__(self, prompt: PromptBundle) -> str: ...


@dataclass(frozen=True)
class Judgement:
    verdict: bool | None  # None: the verifier gave no recognizable verdict
    feedback_text: str
    prompt: PromptBundle | None = None
    raw_response: str | None = None


class Verifier(Protocol):
    def __call__(self, domain: Domain, problem: Problem, plan: Plan, level: FeedbackLevel) -> Judgement: ...


# ---------------------------------------------------------------------------
# Remote chat-completion service


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str
    model_name: str
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    api_key_env: str = "OPENAI_API_KEY"
    backoff_base: float = 1.0
    backoff_max: float = 30.0
    max_concurrent_requests: int = 4

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AgentError(f"environment variable {self.api_key_env} is not set")
        return key


_SEMAPHORES: dict[tuple[str, str], threading.BoundedSemaphore] = {}
_SEMAPHORE_LOCK = threading.Lock()


def _semaphore(config: LlmEndpointConfig) -> threading.BoundedSemaphore:
    key = (config.base_url, config.model_name)
    with _SEMAPHORE_LOCK:
        if key not in _SEMAPHORES:
            _SEMAPHORES[key] = threading.BoundedSemaphore(max(1, config.max_concurrent_requests))
        return _SEMAPHORES[key]


class ChatClient:
    """Generator backed by a chat-completion endpoint.

    Transient failures (connection errors, timeouts, 408/429/5xx) are retried
    up to ``max_retries`` times with exponential backoff. Every exchange is
    appended to ``self.exchanges`` so callers can persist it.
    """

    def __init__(
        self,
        config: LlmEndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._api_key = config.api_key()
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            transport=transport,
        )
        self._sleep = sleep
        self.exchanges: list[dict] = []

    def close(self) -> None:
        self._client.close()

    def _post(self, payload: dict) -> httpx.Response:
        with _semaphore(self.config):
            return self._client.post(
                "/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {self._api_key}"},
            )

    def __call__(self, prompt: PromptBundle) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": prompt.messages(),
            "temperature": self.config.temperature,
        }
        attempts = self.config.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                delay = min(self.config.backoff_max, self.config.backoff_base * 2 ** (attempt - 1))
                self._sleep(delay)
            try:
                resp = self._post(payload)
            except httpx.TimeoutException as exc:
                last_error = f"timeout: {exc}"
                log.warning("attempt %d/%d timed out", attempt + 1, attempts)
                continue
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
                log.warning("attempt %d/%d failed: %s", attempt + 1, attempts, exc)
                continue
            record = {"request": payload, "status": resp.status_code, "response": resp.text}
            self.exchanges.append(record)
            if resp.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                log.warning("attempt %d/%d got HTTP %d", attempt + 1, attempts, resp.status_code)
                continue
            if resp.status_code != 200:
                raise AgentError(f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise AgentError(f"malformed service reply: {resp.text[:200]}") from exc
            if not isinstance(content, str):
                raise AgentError("malformed service reply: content is not text")
            return content
        raise AgentError(f"endpoint failed after {attempts} attempt(s): {last_error}")


# ---------------------------------------------------------------------------
# Verifiers


class SoundVerifier:
    """Validator-backed verifier; its verdict is the ground truth."""

    def __call__(self, domain: Domain, problem: Problem, plan: Plan, level: FeedbackLevel) -> Judgement:
        _, feedback = check(domain, problem, plan, level)
        return Judgement(feedback.verdict, feedback_to_text(feedback, domain))


@dataclass(frozen=True)
class NoisyVerifierConfig:
    fpr: float
    fnr: float
    seed: int = 0

    def __post_init__(self):
        for name in ("fpr", "fnr"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


class NoisyVerifier:
    """Sound verdict flipped at configured rates.

    One uniform draw is consumed per call whatever the outcome, so the flip
    sequence depends only on the seed and the number of calls. A flipped
    rejection carries only the generic sentence; no error details are made up.
    """

    def __init__(self, config: NoisyVerifierConfig, stream: int | str | None = None):
        self.config = config
        seed = config.seed if stream is None else f"{config.seed}:{stream}"
        self._rng = random.Random(seed)

    def __call__(self, domain: Domain, problem: Problem, plan: Plan, level: FeedbackLevel) -> Judgement:
        _, feedback = check(domain, problem, plan, level)
        truth = feedback.verdict
        u = self._rng.random()
        if truth:
            verdict = not (u < self.config.fnr)
        else:
            verdict = u < self.config.fpr
        if verdict:
            return Judgement(True, feedback_to_text(feedback, domain) if truth else "The plan is valid.")
        if truth:
            return Judgement(False, INVALID_TEXT)
        return Judgement(False, feedback_to_text(feedback, domain))


class LlmVerifier:
    """Verifier that asks a text generator (an LLM, or a replay of one)."""

    def __init__(self, backend: Generator, templates: Templates | None = None):
        self.backend = backend
        self.templates = templates

    def __call__(self, domain: Domain, problem: Problem, plan: Plan, level: FeedbackLevel) -> Judgement:
        prompt = verification_prompt(domain, problem, plan, self.templates)
        text = self.backend(prompt)
        parsed = parse_verifier_response(text)
        return Judgement(parsed.verdict, parsed.critique_text, prompt, text)


# ---------------------------------------------------------------------------
# Scripted replay


@dataclass
class ScriptedGenerator:
    """Replays recorded responses in order.

    Each entry is ``{"response": str}`` with an optional ``"prompt_sha256"``.
    In strict mode an entry's digest must match the incoming prompt.
    """

    entries: list[dict]
    strict: bool = False
    calls: int = field(default=0, init=False)

    def __call__(self, prompt: PromptBundle) -> str:
        if self.calls >= len(self.entries):
            raise ScriptExhausted(f"script exhausted after {len(self.entries)} call(s)")
        entry = self.entries[self.calls]
        index = self.calls
        self.calls += 1
        want = entry.get("prompt_sha256")
        if self.strict and want is not None and want != prompt.digest():
            raise PromptMismatch(f"call {index}: prompt digest {prompt.digest()[:12]} != recorded {want[:12]}")
        return entry["response"]


def load_script(path: str | Path) -> dict:
    """Read a script file.

    Two layouts are accepted: ``{"calls": [...]}`` for a single agent, or
    ``{"instances": {instance_id: [...]}}`` for a whole suite.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not ({"calls", "instances"} & data.keys()):
        raise ValueError(f"{path}: expected an object with 'calls' or 'instances'")
    return data


def scripted_agent(
    path: str | Path, instance_id: str | None = None, strict: bool = False
) -> ScriptedGenerator:
    data = load_script(path)
    if instance_id is None:
        if "calls" not in data:
            raise ValueError(f"{path} is a suite script; pass instance_id")
        entries = data["calls"]
    else:
        entries = data.get("instances", {}).get(instance_id)
        if entries is None:
            raise ValueError(f"{path} has no script for instance '{instance_id}'")
    return ScriptedGenerator(list(entries), strict=strict)
