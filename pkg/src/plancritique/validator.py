"""Sound plan validation and feedback rendering.

Two execution regimes are used. The *sound* regime decides the verdict: a
plan with any inapplicable step is invalid, and goals are checked in the
state reached just before the first failing step. The *optimistic* regime
applies every step's effects regardless of applicability; it backs the
open-conditions feedback, which needs to keep going past failures.

The trace stored in :class:`ValidationResult` is the optimistic one. Up to
the first failure the two regimes coincide.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

from . import phrases
from .pddl import (
    Atom,
    Domain,
    GroundAction,
    Plan,
    Problem,
    State,
    applicable,
    apply,
    satisfies,
)

__all__ = [
    "INVALID_TEXT",
    "VALID_TEXT",
    "Feedback",
    "FeedbackLevel",
    "FirstError",
    "OpenConditions",
    "StepRecord",
    "UnmetGoals",
    "ValidationResult",
    "check",
    "feedback_to_text",
    "open_conditions",
    "render_feedback",
    "validate",
]

VALID_TEXT = "The plan is valid."
INVALID_TEXT = "The plan is invalid."


@dataclass(frozen=True)
class StepRecord:
    index: int
    action: GroundAction
    state_before: State
    applicable: bool
    unmet_preconditions: frozenset[Atom]
    state_after: State


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    executable: bool
    trace: tuple[StepRecord, ...]
    first_error_index: int | None
    unmet_goals: frozenset[Atom]

    @property
    def first_error(self) -> StepRecord | None:
        if self.first_error_index is None:
            return None
        return self.trace[self.first_error_index]


class FeedbackLevel(enum.Enum):
    """Amount of detail returned on an invalid plan, in reporting order."""

    NONE = "none"
    BINARY = "binary"
    FIRST_ERROR = "first_error"
    OPEN_CONDITIONS = "open_conditions"

    @classmethod
    def parse(cls, value: str | FeedbackLevel) -> FeedbackLevel:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for level in cls:
            if key in (level.value, level.name.lower()):
                return level
        raise ValueError(f"unknown feedback level {value!r}; expected one of {[lv.value for lv in cls]}")


@dataclass(frozen=True)
class FirstError:
    index: int
    action: GroundAction
    unmet_preconditions: frozenset[Atom]


@dataclass(frozen=True)
class UnmetGoals:
    goals: frozenset[Atom]


@dataclass(frozen=True)
class OpenConditions:
    steps: tuple[tuple[int, GroundAction, frozenset[Atom]], ...]
    unmet_goals: frozenset[Atom]


Detail = Union[None, FirstError, UnmetGoals, OpenConditions]


@dataclass(frozen=True)
class Feedback:
    verdict: bool
    level: FeedbackLevel
    detail: Detail = None


def _optimistic_trace(domain: Domain, problem: Problem, plan: Plan) -> tuple[StepRecord, ...]:
    state = problem.init
    trace = []
    for i, action in enumerate(plan.steps):
        holds, unmet = applicable(state, domain, action)
        after = apply(state, domain, action)
        trace.append(StepRecord(i, action, state, holds, unmet, after))
        state = after
    return tuple(trace)


def validate(domain: Domain, problem: Problem, plan: Plan) -> ValidationResult:
    """Execute ``plan`` from the initial state and decide validity like VAL."""
    trace = _optimistic_trace(domain, problem, plan)
    first = next((r.index for r in trace if not r.applicable), None)
    if first is None:
        halt = trace[-1].state_after if trace else problem.init
    else:
        halt = trace[first].state_before
    _, unmet_goals = satisfies(halt, problem.goal)
    executable = first is None
    return ValidationResult(
        valid=executable and not unmet_goals,
        executable=executable,
        trace=trace,
        first_error_index=first,
        unmet_goals=unmet_goals,
    )


def open_conditions(
    domain: Domain, problem: Problem, plan: Plan
) -> tuple[list[tuple[int, GroundAction, frozenset[Atom]]], frozenset[Atom]]:
    """Every step with an unmet precondition under optimistic execution, plus unmet goals."""
    trace = _optimistic_trace(domain, problem, plan)
    final = trace[-1].state_after if trace else problem.init
    _, unmet_goals = satisfies(final, problem.goal)
    steps = [(r.index, r.action, r.unmet_preconditions) for r in trace if r.unmet_preconditions]
    return steps, unmet_goals


def render_feedback(
    result: ValidationResult,
    oc: tuple[list[tuple[int, GroundAction, frozenset[Atom]]], frozenset[Atom]] | None,
    level: FeedbackLevel,
) -> Feedback:
    level = FeedbackLevel.parse(level)
    if level is FeedbackLevel.OPEN_CONDITIONS and oc is None:
        raise ValueError("open-conditions feedback needs the open_conditions() output")
    if result.valid or level in (FeedbackLevel.NONE, FeedbackLevel.BINARY):
        return Feedback(result.valid, level)
    if level is FeedbackLevel.FIRST_ERROR:
        err = result.first_error
        if err is not None:
            return Feedback(False, level, FirstError(err.index, err.action, err.unmet_preconditions))
        return Feedback(False, level, UnmetGoals(result.unmet_goals))
    steps, goals = oc
    return Feedback(False, level, OpenConditions(tuple(steps), frozenset(goals)))


def _action_text(book: phrases.Phrasebook, action: GroundAction) -> str:
    phrase = book.action(action)
    return phrase if phrase == str(action) else f"{phrase} {action}"


def _atoms_text(book: phrases.Phrasebook, atoms) -> str:
    return phrases.join(book.atom(a) for a in sorted(atoms))


def _unmet_goals_sentence(book: phrases.Phrasebook, goals) -> str:
    noun = "goal condition is" if len(goals) == 1 else "goal conditions are"
    return f"The following {noun} not met: {_atoms_text(book, goals)}."


def feedback_to_text(feedback: Feedback, domain: Domain) -> str:
    """Deterministic English rendering. Step numbers are 1-based in prose."""
    if feedback.verdict:
        return VALID_TEXT
    detail = feedback.detail
    if detail is None:
        return INVALID_TEXT
    book = phrases.for_domain(domain.name)
    if isinstance(detail, FirstError):
        n = len(detail.unmet_preconditions)
        noun = "precondition is" if n == 1 else "preconditions are"
        return (
            f"{INVALID_TEXT} Action {detail.index + 1}, {_action_text(book, detail.action)}, "
            f"is not executable because the following {noun} not met: "
            f"{_atoms_text(book, detail.unmet_preconditions)}."
        )
    if isinstance(detail, UnmetGoals):
        return f"{INVALID_TEXT} The plan is executable, but it does not achieve the goal. " + _unmet_goals_sentence(
            book, detail.goals
        )
    lines = [INVALID_TEXT]
    if detail.steps:
        lines.append("The following actions have unmet preconditions:")
        for index, action, unmet in detail.steps:
            lines.append(f"Action {index + 1}, {_action_text(book, action)}: {_atoms_text(book, unmet)}.")
    else:
        lines.append("Every action has its preconditions met.")
    if detail.unmet_goals:
        lines.append(_unmet_goals_sentence(book, detail.unmet_goals))
    else:
        lines.append("All goal conditions are met at the end of the plan.")
    return "\n".join(lines)


def check(domain: Domain, problem: Problem, plan: Plan, level: FeedbackLevel) -> tuple[ValidationResult, Feedback]:
    """Validate and render feedback at ``level`` in one call."""
    level = FeedbackLevel.parse(level)
    result = validate(domain, problem, plan)
    oc = open_conditions(domain, problem, plan) if level is FeedbackLevel.OPEN_CONDITIONS else None
    return result, render_feedback(result, oc, level)
