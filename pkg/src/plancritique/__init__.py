"""Evaluate LLM plan generation and self-verification on classical planning problems."""

__version__ = "0.1.0"

from .pddl import (
    Atom,
    Domain,
    GroundAction,
    GroundAtom,
    Plan,
    Problem,
    State,
    applicable,
    apply,
    parse_domain,
    parse_plan,
    parse_problem,
    satisfies,
)
from .validator import (
    FeedbackLevel,
    feedback_to_text,
    open_conditions,
    render_feedback,
    validate,
)

__all__ = [
    "Atom",
    "Domain",
    "FeedbackLevel",
    "GroundAction",
    "GroundAtom",
    "Plan",
    "Problem",
    "State",
    "applicable",
    "apply",
    "feedback_to_text",
    "open_conditions",
    "parse_domain",
    "parse_plan",
    "parse_problem",
    "render_feedback",
    "satisfies",
    "validate",
]
