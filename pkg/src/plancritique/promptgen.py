"""Natural-language prompts for the generator and verifier, and response parsing."""

from __future__ import annotations

import enum
import hashlib
import re
from collections.abc import Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

from . import phrases
from .pddl import Domain, GroundAction, PDDLError, Plan, Problem, ground
from .validator import validate

__all__ = [
    "EXAMPLE_MARKER",
    "ParseFailure",
    "ParsedVerdict",
    "PromptBundle",
    "PromptKind",
    "Templates",
    "backprompt",
    "describe_domain",
    "describe_instance",
    "generation_prompt",
    "parse_plan_response",
    "parse_verifier_response",
    "plan_block",
    "verification_prompt",
]

EXAMPLE_MARKER = "[EXAMPLE INSTANCE]"
EMPTY_PLAN_LINE = "; no actions needed"

_TEMPLATE_NAMES = (
    "generation_system",
    "generation_user",
    "verification_system",
    "verification_user",
    "backprompt_user",
    "backprompt_attempt",
)


class PromptKind(str, enum.Enum):
    GENERATION = "generation_one_shot"
    VERIFICATION = "verification_zero_shot"
    BACKPROMPT = "backprompt"


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    kind: PromptKind

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.system_text.encode("utf-8"))
        h.update(b"\x00")
        h.update(self.user_text.encode("utf-8"))
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "system": self.system_text, "user": self.user_text}

    @classmethod
    def from_dict(cls, d: dict) -> PromptBundle:
        return cls(d["system"], d["user"], PromptKind(d["kind"]))


class Templates:
    """Prompt templates: the packaged set, optionally overridden file-by-file from a directory.

    Placeholders use ``string.Template`` syntax (``$name``).
    """

    def __init__(self, override_dir: str | Path | None = None):
        pkg = resources.files("plancritique").joinpath("templates")
        self._texts: dict[str, str] = {}
        self._override_dir = Path(override_dir) if override_dir else None
        base_version = pkg.joinpath("VERSION").read_text(encoding="utf-8").strip()
        overridden = []
        for entry in pkg.iterdir():
            if entry.name.endswith(".txt"):
                self._texts[entry.name[:-4]] = entry.read_text(encoding="utf-8")
        if self._override_dir is not None:
            if not self._override_dir.is_dir():
                raise FileNotFoundError(f"template directory {self._override_dir} does not exist")
            for path in sorted(self._override_dir.glob("*.txt")):
                if path.stem not in _TEMPLATE_NAMES and not path.stem.startswith("domain_"):
                    # most likely a misspelt name that would otherwise be ignored silently
                    raise ValueError(f"unknown template file {path.name}; expected one of {list(_TEMPLATE_NAMES)} or domain_<name>.txt")
                self._texts[path.stem] = path.read_text(encoding="utf-8")
                overridden.append(path)
        missing = [n for n in _TEMPLATE_NAMES if n not in self._texts]
        if missing:
            raise FileNotFoundError(f"missing templates: {missing}")
        if overridden:
            h = hashlib.sha256()
            for path in overridden:
                h.update(path.name.encode() + b"\x00" + self._texts[path.stem].encode("utf-8") + b"\x00")
            self.version = f"{base_version}+{h.hexdigest()[:12]}"
        else:
            self.version = base_version

    def text(self, name: str) -> str | None:
        return self._texts.get(name)

    def render(self, name: str, **values: str) -> str:
        return Template(self._texts[name]).substitute(values)


_DEFAULT_TEMPLATES: Templates | None = None


def default_templates() -> Templates:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = Templates()
    return _DEFAULT_TEMPLATES


# ---------------------------------------------------------------------------
# Rendering


def describe_domain(domain: Domain, templates: Templates | None = None) -> str:
    templates = templates or default_templates()
    handwritten = templates.text(f"domain_{domain.name}")
    if handwritten is not None:
        return handwritten.rstrip("\n")
    book = phrases.for_domain(domain.name)
    lines = [f"The domain '{domain.name}' has the following actions:"]
    for schema in domain.actions.values():
        head = GroundAction(schema.name, schema.params)
        lines.append("")
        lines.append(f"{head}")
        for label, atoms in (
            ("requires", schema.precondition),
            ("makes true", schema.add),
            ("makes false", schema.delete),
        ):
            if atoms:
                lines.append(f"  {label}: " + phrases.join(book.atom(a) for a in sorted(atoms)))
    return "\n".join(lines)


def describe_instance(problem: Problem) -> str:
    book = phrases.for_domain(problem.domain_name)
    init = phrases.join(book.atom(a) for a in sorted(problem.init.atoms)) or "nothing is true"
    goal = phrases.join(book.atom(a) for a in sorted(problem.goal)) or "nothing in particular"
    return f"As initial conditions I have that {init}.\nMy goal is to have that {goal}."


def plan_block(plan: Plan) -> str:
    if not plan.steps:
        return EMPTY_PLAN_LINE
    return "\n".join(str(s) for s in plan.steps)


def generation_prompt(
    domain: Domain,
    example: tuple[Problem, Plan],
    query: Problem,
    templates: Templates | None = None,
) -> PromptBundle:
    """One-shot prompt: domain, one solved example, then the query."""
    templates = templates or default_templates()
    ex_problem, ex_plan = example
    if ex_problem == query:
        raise ValueError("the example instance must differ from the query instance")
    if not validate(domain, ex_problem, ex_plan).valid:
        raise ValueError(f"example plan does not solve example instance '{ex_problem.name}'")
    user = templates.render(
        "generation_user",
        domain_description=describe_domain(domain, templates),
        example_instance=describe_instance(ex_problem),
        example_plan=plan_block(ex_plan),
        query_instance=describe_instance(query),
    )
    return PromptBundle(templates.render("generation_system"), user, PromptKind.GENERATION)


def verification_prompt(
    domain: Domain, query: Problem, plan: Plan, templates: Templates | None = None
) -> PromptBundle:
    """Zero-shot prompt: domain, the query and its candidate plan."""
    templates = templates or default_templates()
    user = templates.render(
        "verification_user",
        domain_description=describe_domain(domain, templates),
        query_instance=describe_instance(query),
        plan=plan_block(plan),
    )
    return PromptBundle(templates.render("verification_system"), user, PromptKind.VERIFICATION)


def backprompt(
    feedback_text: str,
    query: Problem,
    base: PromptBundle | None = None,
    attempts: Sequence[tuple[str, str]] = (),
    templates: Templates | None = None,
) -> PromptBundle:
    """Ask for a revised plan for ``query`` given verifier feedback.

    ``base`` is the original generation prompt (its text is repeated so the
    generator sees the domain again). ``attempts`` lists earlier
    (plan text, feedback) pairs to show; the last pair's feedback should be
    ``feedback_text``. With no attempts, ``feedback_text`` is shown alone.
    """
    templates = templates or default_templates()
    if not attempts:
        attempts = [("", feedback_text)]
    shown = "".join(
        templates.render(
            "backprompt_attempt",
            plan_section=f"[PREVIOUS PLAN]\n{plan_text.rstrip()}\n[PREVIOUS PLAN END]\n" if plan_text.strip() else "",
            feedback=fb,
        )
        for plan_text, fb in attempts
    )
    head = base.user_text.rstrip("\n") if base is not None else "[QUERY INSTANCE]\n" + describe_instance(query)
    user = templates.render("backprompt_user", base=head, attempts=shown.rstrip("\n"))
    system = base.system_text if base is not None else templates.render("generation_system")
    return PromptBundle(system, user, PromptKind.BACKPROMPT)


# ---------------------------------------------------------------------------
# Response parsing


@dataclass(frozen=True)
class ParseFailure:
    reason: str  # unparseable | unknown_action | unknown_object | arity
    message: str
    raw_text: str

    def __bool__(self) -> bool:
        return False


_BULLET = re.compile(r"^\s*(?:[-*•>]+|\d+\s*[.):]|step\s*\d+\s*[.):\-]?)\s*", re.IGNORECASE)
_CANONICAL = re.compile(r"^\(\s*([a-z][\w\-]*)((?:\s+[a-z][\w\-]*)*)\s*\)\s*[.,;]?$", re.IGNORECASE)
_TOLERANT = re.compile(r"^([a-z][\w\-]*)((?:\s+[a-z][\w\-]*)*)\s*[.,;]?$", re.IGNORECASE)


def _squash(name: str) -> str:
    return name.lower().replace("-", "").replace("_", "")


def _action_line(line: str, domain: Domain) -> tuple[str, list[str]] | None:
    line = line.strip().strip("`").strip()
    line = _BULLET.sub("", line, count=1).strip()
    names = {_squash(n): n for n in domain.actions}
    m = _CANONICAL.match(line)
    if m:
        # keep an unknown name as written so grounding reports it
        return names.get(_squash(m.group(1)), m.group(1).lower()), m.group(2).lower().split()
    m = _TOLERANT.match(line)
    if m:
        name = names.get(_squash(m.group(1)))
        if name is not None:
            return name, m.group(2).lower().split()
    return None


def parse_plan_response(text: str, domain: Domain, problem: Problem) -> Plan | ParseFailure:
    """Ground the last contiguous block of action lines in a model response."""
    blocks: list[list[tuple[str, list[str]]]] = []
    current: list[tuple[str, list[str]]] = []
    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped or stripped.startswith(";"):
            continue
        parsed = _action_line(stripped, domain)
        if parsed is None:
            if current:
                blocks.append(current)
                current = []
            continue
        current.append(parsed)
    if current:
        blocks.append(current)
    if not blocks:
        return ParseFailure("unparseable", "no action lines found", text)
    steps = []
    for name, args in blocks[-1]:
        try:
            steps.append(ground(domain, problem, name, args))
        except PDDLError as exc:
            msg = str(exc)
            if "unknown action" in msg:
                reason = "unknown_action"
            elif "undeclared object" in msg:
                reason = "unknown_object"
            else:
                reason = "arity"
            return ParseFailure(reason, msg, text)
    return Plan(tuple(steps))


@dataclass(frozen=True)
class ParsedVerdict:
    verdict: bool | None
    critique_text: str


_NEGATIVE = re.compile(
    r"\binvalid\b|\bincorrect\b|\bwrong\b"
    r"|(?:\bnot|n't|\bnever)\s+(?:(?:a|an|be|considered|entirely|fully|quite)\s+)*(?:valid|correct)\b"
    r"|\bfail(?:s|ed)?\s+to\s+(?:achieve|reach|satisfy)\b"
    r"|\b(?:is|are)\s+not\s+(?:executable|achievable|satisfied|met)\b",
    re.IGNORECASE,
)
_POSITIVE = re.compile(r"\b(?:valid|correct)\b", re.IGNORECASE)


def parse_verifier_response(text: str) -> ParsedVerdict:
    """Pull a valid/invalid verdict out of free-form verifier text.

    Any rejection marker wins over approval markers, so a response that
    hedges ("valid, but step 2 is incorrect") counts as a rejection.
    """
    if _NEGATIVE.search(text):
        return ParsedVerdict(False, text)
    if _POSITIVE.search(text):
        return ParsedVerdict(True, text)
    return ParsedVerdict(None, text)
