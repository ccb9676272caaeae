"""Fixed English phrasings for atoms and actions, per domain.

Unknown domains, predicates or actions fall back to the raw PDDL form, so
rendering never fails and stays deterministic.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

from .pddl import Atom, GroundAction


@dataclass(frozen=True)
class Phrasebook:
    atoms: dict[str, str] = field(default_factory=dict)
    actions: dict[str, str] = field(default_factory=dict)

    def atom(self, atom: Atom) -> str:
        template = self.atoms.get(atom.predicate)
        if template is None or template.count("{}") != len(atom.args):
            return str(atom)
        return template.format(*atom.args)

    def action(self, action: GroundAction) -> str:
        template = self.actions.get(action.name)
        if template is None or template.count("{}") != len(action.args):
            return str(action)
        return template.format(*action.args)


BLOCKSWORLD = Phrasebook(
    atoms={
        "on": "block {} is on top of block {}",
        "ontable": "block {} is on the table",
        "clear": "block {} is clear",
        "holding": "the hand is holding block {}",
        "handempty": "the hand is empty",
    },
    actions={
        "pickup": "pick up block {}",
        "putdown": "put down block {}",
        "stack": "stack block {} on top of block {}",
        "unstack": "unstack block {} from on top of block {}",
    },
)

RAW = Phrasebook()

_REGISTRY: dict[str, Phrasebook] = {"blocksworld": BLOCKSWORLD}


def register(domain_name: str, book: Phrasebook) -> None:
    _REGISTRY[domain_name] = book


def for_domain(domain_name: str) -> Phrasebook:
    return _REGISTRY.get(domain_name, RAW)


def join(items: Iterable[str]) -> str:
    """'x', 'x and y', 'x, y and z'."""
    items = list(items)
    if len(items) <= 1:
        return "".join(items)
    return ", ".join(items[:-1]) + " and " + items[-1]
