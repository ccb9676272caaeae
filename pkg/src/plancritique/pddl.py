"""STRIPS subset of PDDL: parsing, printing and state-transition semantics.

Only untyped STRIPS is accepted: positive conjunctive preconditions and
goals, add/delete effects. Anything richer raises
:class:`UnsupportedFeatureError` naming the feature instead of being
silently dropped. All symbols are lowercased on parse.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Union

__all__ = [
    "ActionSchema",
    "ArityError",
    "Atom",
    "Domain",
    "DuplicateNameError",
    "GroundAction",
    "GroundAtom",
    "PDDLError",
    "PDDLSyntaxError",
    "Plan",
    "PlanParseError",
    "Problem",
    "State",
    "UndeclaredError",
    "UnsupportedFeatureError",
    "applicable",
    "apply",
    "ground_actions",
    "parse_domain",
    "parse_plan",
    "parse_problem",
    "print_domain",
    "print_plan",
    "print_problem",
    "satisfies",
]

SYMBOL_RE = re.compile(r"^[a-z][a-z0-9_\-]*$")


class PDDLError(ValueError):
    """Base class for everything the parser or grounder rejects."""


class PDDLSyntaxError(PDDLError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class UnsupportedFeatureError(PDDLError):
    def __init__(self, feature: str, where: str = ""):
        msg = f"unsupported PDDL feature: {feature}"
        if where:
            msg += f" (in {where})"
        super().__init__(msg)
        self.feature = feature


class ArityError(PDDLError):
    pass


class DuplicateNameError(PDDLError):
    pass


class UndeclaredError(PDDLError):
    """An object or predicate that was never declared."""

    def __init__(self, kind: str, name: str, where: str = ""):
        msg = f"undeclared {kind} '{name}'"
        if where:
            msg += f" in {where}"
        super().__init__(msg)
        self.kind = kind
        self.name = name


class PlanParseError(PDDLError):
    def __init__(self, message: str, line: int):
        super().__init__(f"plan line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# Core types


class Atom(NamedTuple):
    """A predicate applied to arguments.

    Inside action schemas the arguments may be variables (``?x``); everywhere
    else they are object names.
    """

    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate,) + self.args) + ")"


GroundAtom = Atom


class GroundAction(NamedTuple):
    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"


@dataclass(frozen=True)
class State:
    """Closed-world state: exactly the atoms in ``atoms`` are true."""

    atoms: frozenset[Atom] = frozenset()

    def __post_init__(self):
        if not isinstance(self.atoms, frozenset):
            object.__setattr__(self, "atoms", frozenset(self.atoms))

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms

    def __iter__(self) -> Iterator[Atom]:
        return iter(sorted(self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[str, ...]
    precondition: frozenset[Atom]
    add: frozenset[Atom]
    delete: frozenset[Atom]

    def ground(self, args: Sequence[str]) -> tuple[frozenset[Atom], frozenset[Atom], frozenset[Atom]]:
        """Return (precondition, add, delete) with parameters bound to ``args``."""
        if len(args) != len(self.params):
            raise ArityError(
                f"action '{self.name}' takes {len(self.params)} argument(s), got {len(args)}"
            )
        return _ground_schema(self, tuple(args))


@lru_cache(maxsize=65536)
def _ground_schema(schema: ActionSchema, args: tuple[str, ...]):
    binding = dict(zip(schema.params, args))

    def sub(atoms: frozenset[Atom]) -> frozenset[Atom]:
        return frozenset(Atom(a.predicate, tuple(binding.get(x, x) for x in a.args)) for a in atoms)

    return sub(schema.precondition), sub(schema.add), sub(schema.delete)


@dataclass(frozen=True)
class Domain:
    name: str
    predicates: dict[str, int]
    actions: dict[str, ActionSchema] = field(default_factory=dict)

    def schema(self, name: str) -> ActionSchema:
        try:
            return self.actions[name]
        except KeyError:
            raise PDDLError(f"unknown action '{name}' in domain '{self.name}'") from None


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: tuple[str, ...]
    init: State
    goal: frozenset[Atom]

    def __post_init__(self):
        if not isinstance(self.goal, frozenset):
            object.__setattr__(self, "goal", frozenset(self.goal))


@dataclass(frozen=True)
class Plan:
    steps: tuple[GroundAction, ...] = ()

    def __post_init__(self):
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[GroundAction]:
        return iter(self.steps)


# ---------------------------------------------------------------------------
# S-expression reader


class _Tok(NamedTuple):
    text: str
    line: int
    col: int


class _List(list):
    """A parenthesised list that remembers where it opened."""

    line: int = 0
    col: int = 0


SExpr = Union[_Tok, _List]


def _tokenize(text: str) -> Iterator[_Tok]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
        elif ch.isspace():
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield _Tok(ch, line, col)
            i += 1
            col += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield _Tok(text[i:j].lower(), line, col)
            col += j - i
            i = j


def _read(text: str) -> _List:
    stack: list[_List] = []
    top: _List | None = None
    last = _Tok("", 1, 1)
    for tok in _tokenize(text):
        last = tok
        if tok.text == "(":
            lst = _List()
            lst.line, lst.col = tok.line, tok.col
            if stack:
                stack[-1].append(lst)
            elif top is not None:
                raise PDDLSyntaxError("unexpected content after top-level expression", tok.line, tok.col)
            stack.append(lst)
        elif tok.text == ")":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            if not stack:
                top = done
        else:
            if not stack:
                raise PDDLSyntaxError(f"unexpected token '{tok.text}' outside parentheses", tok.line, tok.col)
            stack[-1].append(tok)
    if stack:
        raise PDDLSyntaxError("unbalanced '(' (missing ')')", stack[-1].line, stack[-1].col)
    if top is None:
        raise PDDLSyntaxError("empty input", last.line, last.col)
    return top


def _pos(x: SExpr) -> tuple[int, int]:
    return (x.line, x.col)


def _word(x: SExpr, what: str) -> str:
    if isinstance(x, _List):
        raise PDDLSyntaxError(f"expected {what}, found a list", *_pos(x))
    return x.text


def _symbol(x: SExpr, what: str) -> str:
    s = _word(x, what)
    if not SYMBOL_RE.match(s):
        raise PDDLSyntaxError(f"invalid {what} '{s}'", *_pos(x))
    return s


def _variable(x: SExpr) -> str:
    s = _word(x, "variable")
    if not (s.startswith("?") and SYMBOL_RE.match(s[1:])):
        raise PDDLSyntaxError(f"invalid variable '{s}'", *_pos(x))
    return s


_UNSUPPORTED_CONNECTIVES = {
    "or": "disjunctive-preconditions",
    "imply": "disjunctive-preconditions",
    "exists": "existential-preconditions",
    "forall": "universal-preconditions",
    "when": "conditional-effects",
    "=": "equality",
    "increase": "numeric-fluents",
    "decrease": "numeric-fluents",
    "assign": "numeric-fluents",
    "scale-up": "numeric-fluents",
    "scale-down": "numeric-fluents",
    ">": "numeric-fluents",
    "<": "numeric-fluents",
    ">=": "numeric-fluents",
    "<=": "numeric-fluents",
    "preference": "preferences",
}

# "at" and "over" are ordinary predicate names unless they open a timed condition
_TEMPORAL = {"at": ("start", "end"), "over": ("all",)}

_UNSUPPORTED_SECTIONS = {
    ":types": "typing",
    ":constants": "constants",
    ":functions": "numeric-fluents",
    ":durative-action": "durative-actions",
    ":derived": "derived-predicates",
    ":constraints": "constraints",
    ":metric": "numeric-fluents",
}


def _header(expr: SExpr, keyword: str) -> _List:
    if not isinstance(expr, _List) or len(expr) < 2:
        raise PDDLSyntaxError("expected (define ...)", *_pos(expr))
    if _word(expr[0], "'define'") != "define":
        raise PDDLSyntaxError("expected 'define'", *_pos(expr[0]))
    head = expr[1]
    if not isinstance(head, _List) or len(head) != 2 or _word(head[0], keyword) != keyword:
        raise PDDLSyntaxError(f"expected ({keyword} <name>)", *_pos(head))
    return head


def _atom(x: SExpr, where: str, allow_vars: bool) -> Atom:
    if not isinstance(x, _List) or not x:
        raise PDDLSyntaxError(f"expected an atom in {where}", *_pos(x))
    head = _word(x[0], "predicate name")
    if head in _UNSUPPORTED_CONNECTIVES:
        raise UnsupportedFeatureError(_UNSUPPORTED_CONNECTIVES[head], where)
    if head in _TEMPORAL and len(x) > 1 and not isinstance(x[1], _List) and x[1].text in _TEMPORAL[head]:
        raise UnsupportedFeatureError("durative-actions", where)
    if head in ("and", "not"):
        raise PDDLSyntaxError(f"unexpected '{head}' in {where}", *_pos(x))
    pred = _symbol(x[0], "predicate name")
    args = []
    for a in x[1:]:
        w = _word(a, "argument")
        if w.startswith("?"):
            if not allow_vars:
                raise PDDLSyntaxError(f"variable '{w}' not allowed in {where}", *_pos(a))
            args.append(_variable(a))
        else:
            args.append(_symbol(a, "object name"))
    return Atom(pred, tuple(args))


def _conjunction(x: SExpr, where: str, allow_vars: bool) -> list[Atom]:
    """Flatten a positive conjunction (``(and ...)``, a single atom, or ``()``)."""
    if not isinstance(x, _List):
        raise PDDLSyntaxError(f"expected a formula in {where}", *_pos(x))
    if not x:
        return []
    head = _word(x[0], "formula") if not isinstance(x[0], _List) else None
    if head == "and":
        out: list[Atom] = []
        for sub in x[1:]:
            out.extend(_conjunction(sub, where, allow_vars))
        return out
    if head == "not":
        raise UnsupportedFeatureError("negative-preconditions", where)
    return [_atom(x, where, allow_vars)]


def _effects(x: SExpr, where: str) -> tuple[list[Atom], list[Atom]]:
    if not isinstance(x, _List):
        raise PDDLSyntaxError(f"expected an effect in {where}", *_pos(x))
    if not x:
        return [], []
    head = _word(x[0], "effect") if not isinstance(x[0], _List) else None
    if head == "and":
        add: list[Atom] = []
        dele: list[Atom] = []
        for sub in x[1:]:
            a, d = _effects(sub, where)
            add.extend(a)
            dele.extend(d)
        return add, dele
    if head == "not":
        if len(x) != 2:
            raise PDDLSyntaxError("'not' takes exactly one atom", *_pos(x))
        return [], [_atom(x[1], where, True)]
    return [_atom(x, where, True)], []


def _check_atom(atom: Atom, predicates: dict[str, int], where: str) -> None:
    if atom.predicate not in predicates:
        raise UndeclaredError("predicate", atom.predicate, where)
    want = predicates[atom.predicate]
    if len(atom.args) != want:
        raise ArityError(
            f"predicate '{atom.predicate}' has arity {want}, used with {len(atom.args)} argument(s) in {where}"
        )


def _dedupe(items: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


# ---------------------------------------------------------------------------
# Domain / problem parsing


def parse_domain(text: str) -> Domain:
    """Parse a domain file in the supported STRIPS subset."""
    expr = _read(text)
    name = _symbol(_header(expr, "domain")[1], "domain name")
    predicates: dict[str, int] = {}
    raw_actions: list[_List] = []
    for section in expr[2:]:
        if not isinstance(section, _List) or not section:
            raise PDDLSyntaxError("expected a domain section", *_pos(section))
        key = _word(section[0], "section keyword")
        if key in _UNSUPPORTED_SECTIONS:
            raise UnsupportedFeatureError(_UNSUPPORTED_SECTIONS[key], f"domain '{name}'")
        if key == ":requirements":
            for r in section[1:]:
                req = _word(r, "requirement")
                if req != ":strips":
                    raise UnsupportedFeatureError(req.lstrip(":"), ":requirements")
        elif key == ":predicates":
            for p in section[1:]:
                if not isinstance(p, _List) or not p:
                    raise PDDLSyntaxError("expected a predicate declaration", *_pos(p))
                pname = _symbol(p[0], "predicate name")
                params = p[1:]
                if any(_word(v, "parameter") == "-" for v in params):
                    raise UnsupportedFeatureError("typing", f"predicate '{pname}'")
                for v in params:
                    _variable(v)
                if pname in predicates:
                    raise DuplicateNameError(f"duplicate predicate '{pname}'")
                predicates[pname] = len(params)
        elif key == ":action":
            raw_actions.append(section)
        else:
            raise PDDLSyntaxError(f"unknown domain section '{key}'", *_pos(section))

    actions: dict[str, ActionSchema] = {}
    for section in raw_actions:
        schema = _parse_action(section, predicates)
        if schema.name in actions:
            raise DuplicateNameError(f"duplicate action '{schema.name}'")
        actions[schema.name] = schema
    return Domain(name=name, predicates=predicates, actions=actions)


def _parse_action(section: _List, predicates: dict[str, int]) -> ActionSchema:
    if len(section) < 2:
        raise PDDLSyntaxError("action without a name", *_pos(section))
    aname = _symbol(section[1], "action name")
    where = f"action '{aname}'"
    params: tuple[str, ...] = ()
    pre: list[Atom] = []
    add: list[Atom] = []
    dele: list[Atom] = []
    rest = section[2:]
    if len(rest) % 2:
        raise PDDLSyntaxError(f"odd number of items in {where}", *_pos(section))
    for k, v in zip(rest[::2], rest[1::2]):
        key = _word(k, "action keyword")
        if key == ":parameters":
            if not isinstance(v, _List):
                raise PDDLSyntaxError("expected a parameter list", *_pos(v))
            if any(_word(p, "parameter") == "-" for p in v):
                raise UnsupportedFeatureError("typing", where)
            params = tuple(_variable(p) for p in v)
            if len(set(params)) != len(params):
                raise DuplicateNameError(f"duplicate parameter in {where}")
        elif key == ":precondition":
            pre = _conjunction(v, where, allow_vars=True)
        elif key == ":effect":
            add, dele = _effects(v, where)
        else:
            raise PDDLSyntaxError(f"unknown action keyword '{key}'", *_pos(k))
    for atom in itertools.chain(pre, add, dele):
        _check_atom(atom, predicates, where)
        for arg in atom.args:
            if not arg.startswith("?"):
                raise UnsupportedFeatureError("constants", where)
            if arg not in params:
                raise PDDLError(f"variable '{arg}' in {where} is not a parameter")
    both = set(add) & set(dele)
    if both:
        raise PDDLError(f"{where} both adds and deletes {sorted(map(str, both))[0]}")
    return ActionSchema(aname, params, frozenset(pre), frozenset(add), frozenset(dele))


def parse_problem(text: str, domain: Domain) -> Problem:
    """Parse a problem file against an already parsed ``domain``."""
    expr = _read(text)
    name = _symbol(_header(expr, "problem")[1], "problem name")
    domain_name = None
    objects: tuple[str, ...] = ()
    init_atoms: list[Atom] = []
    goal: list[Atom] = []
    for section in expr[2:]:
        if not isinstance(section, _List) or not section:
            raise PDDLSyntaxError("expected a problem section", *_pos(section))
        key = _word(section[0], "section keyword")
        if key in _UNSUPPORTED_SECTIONS:
            raise UnsupportedFeatureError(_UNSUPPORTED_SECTIONS[key], f"problem '{name}'")
        if key == ":domain":
            if len(section) != 2:
                raise PDDLSyntaxError("expected (:domain <name>)", *_pos(section))
            domain_name = _symbol(section[1], "domain name")
        elif key == ":requirements":
            for r in section[1:]:
                req = _word(r, "requirement")
                if req != ":strips":
                    raise UnsupportedFeatureError(req.lstrip(":"), ":requirements")
        elif key == ":objects":
            if any(_word(o, "object") == "-" for o in section[1:]):
                raise UnsupportedFeatureError("typing", ":objects")
            objects = _dedupe(_symbol(o, "object name") for o in section[1:])
        elif key == ":init":
            for a in section[1:]:
                if isinstance(a, _List) and a and not isinstance(a[0], _List) and a[0].text == "not":
                    raise UnsupportedFeatureError("negative-literals", ":init")
                init_atoms.append(_atom(a, ":init", allow_vars=False))
        elif key == ":goal":
            if len(section) > 2:
                raise PDDLSyntaxError("expected a single goal formula", *_pos(section))
            goal = _conjunction(section[1], ":goal", allow_vars=False) if len(section) == 2 else []
        else:
            raise PDDLSyntaxError(f"unknown problem section '{key}'", *_pos(section))
    if domain_name is None:
        raise PDDLError(f"problem '{name}' does not name its domain")
    if domain_name != domain.name:
        raise PDDLError(f"problem '{name}' is for domain '{domain_name}', not '{domain.name}'")
    declared = set(objects)
    for where, atoms in ((":init", init_atoms), (":goal", goal)):
        for atom in atoms:
            _check_atom(atom, domain.predicates, where)
            for arg in atom.args:
                if arg not in declared:
                    raise UndeclaredError("object", arg, where)
    return Problem(name, domain_name, objects, State(frozenset(init_atoms)), frozenset(goal))


# ---------------------------------------------------------------------------
# Plans


_PLAN_LINE = re.compile(r"^\(\s*([^\s()]+)((?:\s+[^\s()]+)*)\s*\)$")


def ground(domain: Domain, problem: Problem, name: str, args: Sequence[str]) -> GroundAction:
    """Build a well-grounded action or raise."""
    name = name.lower()
    args = tuple(a.lower() for a in args)
    if name not in domain.actions:
        raise PDDLError(f"unknown action '{name}'")
    want = len(domain.actions[name].params)
    if len(args) != want:
        raise ArityError(f"action '{name}' takes {want} argument(s), got {len(args)}")
    objects = set(problem.objects)
    for a in args:
        if a not in objects:
            raise UndeclaredError("object", a, f"action '{name}'")
    return GroundAction(name, args)


def parse_plan(text: str, domain: Domain, problem: Problem) -> Plan:
    """Read one ``(name arg ...)`` per line; blank lines and ``;`` comments are skipped."""
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = _PLAN_LINE.match(line)
        if not m:
            raise PlanParseError(f"malformed action '{line}'", lineno)
        try:
            steps.append(ground(domain, problem, m.group(1), m.group(2).split()))
        except PDDLError as exc:
            raise PlanParseError(str(exc), lineno) from exc
    return Plan(tuple(steps))


def print_plan(plan: Plan) -> str:
    return "".join(f"{step}\n" for step in plan.steps)


# ---------------------------------------------------------------------------
# Printers


def _fmt_conj(atoms: Iterable[Atom]) -> str:
    atoms = sorted(atoms)
    if not atoms:
        return "()"
    return "(and " + " ".join(map(str, atoms)) + ")"


def print_domain(domain: Domain) -> str:
    lines = [f"(define (domain {domain.name})", "  (:requirements :strips)"]
    preds = " ".join(
        "(" + " ".join([p] + [f"?x{i}" for i in range(arity)]) + ")" for p, arity in domain.predicates.items()
    )
    lines.append(f"  (:predicates {preds})")
    for schema in domain.actions.values():
        eff_all = " ".join(
            [str(a) for a in sorted(schema.add)] + [f"(not {a})" for a in sorted(schema.delete)]
        )
        lines += [
            f"  (:action {schema.name}",
            f"    :parameters ({' '.join(schema.params)})",
            f"    :precondition {_fmt_conj(schema.precondition)}",
            f"    :effect {'(and ' + eff_all + ')' if eff_all else '()'})",
        ]
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(problem: Problem) -> str:
    init = "\n    ".join(str(a) for a in sorted(problem.init.atoms))
    return (
        f"(define (problem {problem.name})\n"
        f"  (:domain {problem.domain_name})\n"
        f"  (:objects {' '.join(problem.objects)})\n"
        f"  (:init\n    {init})\n"
        f"  (:goal {_fmt_conj(problem.goal)})\n"
        ")\n"
    )


# ---------------------------------------------------------------------------
# Semantics


def applicable(state: State, domain: Domain, action: GroundAction) -> tuple[bool, frozenset[Atom]]:
    """Check preconditions; returns (holds, unmet precondition atoms)."""
    pre, _, _ = domain.schema(action.name).ground(action.args)
    unmet = pre - state.atoms
    return (not unmet, unmet)


def apply(state: State, domain: Domain, action: GroundAction) -> State:
    """Successor state. Total: effects are applied whether or not preconditions hold."""
    _, add, delete = domain.schema(action.name).ground(action.args)
    return State((state.atoms - delete) | add)


def satisfies(state: State, goal: Iterable[Atom]) -> tuple[bool, frozenset[Atom]]:
    unmet = frozenset(goal) - state.atoms
    return (not unmet, unmet)


def ground_actions(domain: Domain, problem: Problem) -> list[GroundAction]:
    """Every parameter binding of every schema over the problem's objects, sorted."""
    out = []
    for name, schema in domain.actions.items():
        for args in itertools.product(problem.objects, repeat=len(schema.params)):
            out.append(GroundAction(name, args))
    return sorted(out)
