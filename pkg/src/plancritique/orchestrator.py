"""The backprompting loop, per instance and per suite, with persisted transcripts."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import random
import threading
import time
from collections.abc import Callable, Sequence
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .agents import AgentError, Generator, Verifier
from .blocksworld import bfs_plan, plan_length_bound
from .pddl import Domain, GroundAction, Plan, Problem, print_problem
from .promptgen import (
    ParseFailure,
    PromptBundle,
    Templates,
    backprompt,
    default_templates,
    generation_prompt,
    parse_plan_response,
    plan_block,
)
from .validator import FeedbackLevel, validate

__all__ = [
    "UNPARSEABLE_TEXT",
    "AgentFactory",
    "ExperimentMode",
    "Iteration",
    "LoopConfig",
    "RunConflict",
    "StopReason",
    "Transcript",
    "TranscriptStore",
    "choose_example",
    "run_instance",
    "run_suite",
]

log = logging.getLogger(__name__)

UNPARSEABLE_TEXT = (
    "The plan could not be parsed. Write one action per line in the form (action arg1 arg2)."
)


class ExperimentMode(str, enum.Enum):
    GENERATOR_ONLY = "generator_only"
    LLM_PLUS_LLM = "llm_plus_llm"
    LLM_PLUS_SOUND = "llm_plus_sound"
    LLM_PLUS_NOISY = "llm_plus_noisy"


class StopReason(str, enum.Enum):
    APPROVED = "approved"
    EXHAUSTED = "exhausted"
    AGENT_ERROR = "agent_error"


@dataclass(frozen=True)
class LoopConfig:
    mode: ExperimentMode
    feedback_level: FeedbackLevel = FeedbackLevel.FIRST_ERROR
    max_iterations: int = 15
    seed: int = 0
    full_history: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", ExperimentMode(self.mode))
        object.__setattr__(self, "feedback_level", FeedbackLevel.parse(self.feedback_level))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def iteration_budget(self) -> int:
        # no feedback means the first plan is final
        if self.mode is ExperimentMode.GENERATOR_ONLY or self.feedback_level is FeedbackLevel.NONE:
            return 1
        return self.max_iterations

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "feedback_level": self.feedback_level.value,
            "max_iterations": self.max_iterations,
            "seed": self.seed,
            "full_history": self.full_history,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LoopConfig:
        return cls(
            mode=ExperimentMode(d["mode"]),
            feedback_level=FeedbackLevel.parse(d.get("feedback_level", "first_error")),
            max_iterations=int(d.get("max_iterations", 15)),
            seed=int(d.get("seed", 0)),
            full_history=bool(d.get("full_history", False)),
        )


def _plan_to_json(plan: Plan | ParseFailure | None):
    if plan is None:
        return None
    if isinstance(plan, ParseFailure):
        return {"failure": plan.reason, "message": plan.message}
    return [str(step) for step in plan.steps]


def _plan_from_json(value, raw_text: str = ""):
    if value is None:
        return None
    if isinstance(value, dict):
        return ParseFailure(value["failure"], value["message"], raw_text)
    steps = []
    for line in value:
        name, *args = line.strip("()").split()
        steps.append(GroundAction(name, tuple(args)))
    return Plan(tuple(steps))


@dataclass(frozen=True)
class Iteration:
    index: int
    prompt: PromptBundle
    raw_response: str
    parsed_plan: Plan | ParseFailure
    verifier_verdict: bool | None
    verifier_feedback: str
    ground_truth_valid: bool
    verdict_absent: bool = False
    verifier_prompt: PromptBundle | None = None
    verifier_raw: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prompt": self.prompt.to_dict(),
            "raw_response": self.raw_response,
            "parsed_plan": _plan_to_json(self.parsed_plan),
            "verifier_verdict": self.verifier_verdict,
            "verdict_absent": self.verdict_absent,
            "verifier_feedback": self.verifier_feedback,
            "verifier_prompt": self.verifier_prompt.to_dict() if self.verifier_prompt else None,
            "verifier_raw": self.verifier_raw,
            "ground_truth_valid": self.ground_truth_valid,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Iteration:
        return cls(
            index=d["index"],
            prompt=PromptBundle.from_dict(d["prompt"]),
            raw_response=d["raw_response"],
            parsed_plan=_plan_from_json(d["parsed_plan"], d["raw_response"]),
            verifier_verdict=d["verifier_verdict"],
            verifier_feedback=d["verifier_feedback"],
            ground_truth_valid=d["ground_truth_valid"],
            verdict_absent=d.get("verdict_absent", False),
            verifier_prompt=PromptBundle.from_dict(d["verifier_prompt"]) if d.get("verifier_prompt") else None,
            verifier_raw=d.get("verifier_raw"),
        )


@dataclass(frozen=True)
class Transcript:
    instance_id: str
    config: LoopConfig
    iterations: tuple[Iteration, ...]
    stop_reason: StopReason
    wall_clock: float = 0.0
    error: str | None = None
    example_id: str | None = None

    @property
    def last(self) -> Iteration | None:
        return self.iterations[-1] if self.iterations else None

    @property
    def final_plan(self) -> Plan | None:
        last = self.last
        if last is None or isinstance(last.parsed_plan, ParseFailure):
            return None
        return last.parsed_plan

    @property
    def final_verifier_verdict(self) -> bool | None:
        return self.last.verifier_verdict if self.last else None

    @property
    def final_ground_truth(self) -> bool:
        return bool(self.last and self.last.ground_truth_valid)

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "config": self.config.to_dict(),
            "example_id": self.example_id,
            "iterations": [it.to_dict() for it in self.iterations],
            "stop_reason": self.stop_reason.value,
            "final_plan": _plan_to_json(self.final_plan),
            "final_verifier_verdict": self.final_verifier_verdict,
            "final_ground_truth": self.final_ground_truth,
            "error": self.error,
            "wall_clock": self.wall_clock,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> Transcript:
        return cls(
            instance_id=d["instance_id"],
            config=LoopConfig.from_dict(d["config"]),
            iterations=tuple(Iteration.from_dict(it) for it in d["iterations"]),
            stop_reason=StopReason(d["stop_reason"]),
            wall_clock=float(d.get("wall_clock", 0.0)),
            error=d.get("error"),
            example_id=d.get("example_id"),
        )


def run_instance(
    config: LoopConfig,
    domain: Domain,
    problem: Problem,
    generator: Generator,
    verifier: Verifier | None,
    example: tuple[Problem, Plan],
    templates: Templates | None = None,
    clock: Callable[[], float] | None = time.perf_counter,
    instance_id: str | None = None,
) -> Transcript:
    """Generate, verify and backprompt until approval or the iteration budget runs out.

    Each backprompt repeats the first prompt plus the latest plan and its
    feedback (all earlier attempts too when ``config.full_history``).
    A response that does not parse uses up an iteration, is judged invalid
    without consulting the verifier, and is answered with ``UNPARSEABLE_TEXT``.
    """
    templates = templates or default_templates()
    start = clock() if clock else 0.0
    if config.mode is not ExperimentMode.GENERATOR_ONLY and verifier is None:
        raise ValueError(f"mode {config.mode.value} needs a verifier")
    iterations: list[Iteration] = []
    history: list[tuple[str, str]] = []
    base: PromptBundle | None = None
    stop = StopReason.EXHAUSTED
    error = None
    for k in range(1, config.iteration_budget + 1):
        if base is None:
            prompt = base = generation_prompt(domain, example, problem, templates)
        else:
            attempts = history if config.full_history else history[-1:]
            prompt = backprompt(history[-1][1], problem, base, attempts, templates)
        try:
            raw = generator(prompt)
        except AgentError as exc:
            stop, error = StopReason.AGENT_ERROR, f"generator: {exc}"
            break
        parsed = parse_plan_response(raw, domain, problem)
        verdict: bool | None = None
        absent = False
        feedback = ""
        vprompt = vraw = None
        if isinstance(parsed, ParseFailure):
            truth = False
            shown = raw.strip()
            if config.mode is not ExperimentMode.GENERATOR_ONLY:
                verdict, feedback = False, UNPARSEABLE_TEXT
        else:
            truth = validate(domain, problem, parsed).valid
            shown = plan_block(parsed)
            if config.mode is not ExperimentMode.GENERATOR_ONLY:
                try:
                    judgement = verifier(domain, problem, parsed, config.feedback_level)
                except AgentError as exc:
                    iterations.append(Iteration(k, prompt, raw, parsed, None, "", truth))
                    stop, error = StopReason.AGENT_ERROR, f"verifier: {exc}"
                    break
                absent = judgement.verdict is None
                verdict = bool(judgement.verdict)
                feedback = judgement.feedback_text
                vprompt, vraw = judgement.prompt, judgement.raw_response
        iterations.append(Iteration(k, prompt, raw, parsed, verdict, feedback, truth, absent, vprompt, vraw))
        if verdict:
            stop = StopReason.APPROVED
            break
        history.append((shown, feedback))
    wall = (clock() - start) if clock else 0.0
    return Transcript(
        instance_id=instance_id or problem.name,
        config=config,
        iterations=tuple(iterations),
        stop_reason=stop,
        wall_clock=wall,
        error=error,
        example_id=example[0].name,
    )


# ---------------------------------------------------------------------------
# Suites


@dataclass
class AgentFactory:
    """Builds fresh agents per instance so concurrent instances share no state."""

    generator: Callable[[str], Generator]
    verifier: Callable[[str], Verifier | None] = lambda instance_id: None


def choose_example(
    domain: Domain, problems: Sequence[Problem], index: int, seed: int
) -> tuple[Problem, Plan]:
    """Pick the one-shot example for ``problems[index]``: a different instance, solved by BFS."""
    others = [i for i, p in enumerate(problems) if i != index and p != problems[index]]
    if not others:
        raise ValueError("the suite needs at least two distinct instances to draw a one-shot example")
    rng = random.Random(f"{seed}:example:{problems[index].name}")
    chosen = problems[rng.choice(others)]
    plan = bfs_plan(domain, chosen, max_depth=plan_length_bound(len(chosen.objects)))
    if plan is None:
        raise ValueError(f"no plan found for example instance '{chosen.name}'")
    return chosen, plan


class RunConflict(RuntimeError):
    """Existing run output was produced under a different configuration."""


class TranscriptStore:
    """Append-only transcript file plus a run manifest in ``directory``."""

    TRANSCRIPTS = "transcripts.jsonl"
    MANIFEST = "manifest.json"

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.path = self.directory / self.TRANSCRIPTS
        self.manifest_path = self.directory / self.MANIFEST
        self._lock = threading.Lock()

    def load(self) -> list[Transcript]:
        """Read persisted transcripts; an unterminated trailing line (crash mid-write) is discarded."""
        if not self.path.exists():
            return []
        data = self.path.read_bytes()
        complete, _, tail = data.rpartition(b"\n")
        if tail:
            log.warning("discarding incomplete trailing record in %s", self.path)
            with self._lock, open(self.path, "r+b") as fh:
                fh.truncate(len(complete) + 1 if complete else 0)
        lines = complete.decode("utf-8").splitlines() if complete else []
        return [Transcript.from_dict(json.loads(line)) for line in lines if line.strip()]

    def append(self, transcript: Transcript) -> None:
        line = transcript.to_json() + "\n"
        with self._lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()

    def check_manifest(self, identity: dict, force: bool = False) -> None:
        """Write the run manifest, or confirm an existing one describes the same run."""
        self.directory.mkdir(parents=True, exist_ok=True)
        now = datetime.now(timezone.utc).isoformat(timespec="seconds")
        if self.manifest_path.exists():
            old = json.loads(self.manifest_path.read_text(encoding="utf-8"))
            if old.get("identity") != identity:
                if not force:
                    raise RunConflict(
                        f"{self.directory} holds a run with a different configuration; use --force to start over"
                    )
                if self.path.exists():
                    self.path.unlink()
                old = {"created": now}
            manifest = {"identity": identity, "created": old.get("created", now), "updated": now}
        else:
            if self.path.exists() and not force:
                raise RunConflict(f"{self.path} exists without a manifest")
            if self.path.exists():
                self.path.unlink()
            manifest = {"identity": identity, "created": now, "updated": now}
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def suite_digest(problems: Sequence[Problem]) -> str:
    h = hashlib.sha256()
    for p in problems:
        h.update(print_problem(p).encode("utf-8"))
    return h.hexdigest()


def run_suite(
    config: LoopConfig,
    domain: Domain,
    problems: Sequence[Problem],
    agents: AgentFactory,
    parallelism: int = 1,
    store: TranscriptStore | None = None,
    templates: Templates | None = None,
    clock: Callable[[], float] | None = time.perf_counter,
    force: bool = False,
    run_identity: dict | None = None,
) -> list[Transcript]:
    """One transcript per instance, in suite order.

    With a ``store``, finished transcripts are appended in suite order as
    soon as all earlier ones are done, so the file is identical for any
    ``parallelism``; a rerun loads what is there and runs only the rest.
    ``run_identity`` adds fields (agent settings, say) that a resumed run
    must match.
    """
    if not problems:
        raise ValueError("suite is empty")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    templates = templates or default_templates()
    ids = [p.name for p in problems]
    if len(set(ids)) != len(ids):
        raise ValueError("instance names must be unique within a suite")

    done: dict[str, Transcript] = {}
    if store is not None:
        store.check_manifest(
            {
                "config": config.to_dict(),
                "template_version": templates.version,
                "suite_sha256": suite_digest(problems),
                "instances": ids,
                **(run_identity or {}),
            },
            force=force,
        )
        for t in store.load():
            done[t.instance_id] = t
        if done:
            log.info("resuming: %d of %d instances already finished", len(done), len(ids))

    results: list[Transcript | None] = [done.get(i) for i in ids]
    todo = [i for i, r in enumerate(results) if r is None]
    next_commit = 0

    def commit() -> None:
        nonlocal next_commit
        while next_commit < len(results) and results[next_commit] is not None:
            t = results[next_commit]
            if store is not None and t.instance_id not in done:
                store.append(t)
                done[t.instance_id] = t
            next_commit += 1

    def job(i: int) -> Transcript:
        problem = problems[i]
        example = choose_example(domain, problems, i, config.seed)
        return run_instance(
            config,
            domain,
            problem,
            agents.generator(problem.name),
            agents.verifier(problem.name),
            example,
            templates=templates,
            clock=clock,
            instance_id=problem.name,
        )

    commit()
    if parallelism == 1:
        for i in todo:
            results[i] = job(i)
            commit()
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            pending = {pool.submit(job, i): i for i in todo}
            try:
                while pending:
                    finished, _ = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in finished:
                        i = pending.pop(fut)
                        results[i] = fut.result()
                    commit()
            except BaseException:
                for fut in pending:
                    fut.cancel()
                raise
    return [t for t in results if t is not None]


def transcripts_equal_modulo_clock(a: Sequence[Transcript], b: Sequence[Transcript]) -> bool:
    def strip(t: Transcript) -> dict:
        d = t.to_dict()
        d.pop("wall_clock")
        return d

    return [strip(t) for t in a] == [strip(t) for t in b]
