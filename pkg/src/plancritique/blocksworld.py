"""Blocksworld: built-in domain, random instances and a breadth-first oracle."""

from __future__ import annotations

import random
import string
from collections import deque
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from importlib import resources
from math import comb, factorial

from .pddl import (
    ActionSchema,
    Atom,
    Domain,
    GroundAction,
    Plan,
    Problem,
    State,
    ground_actions,
    parse_domain,
)

__all__ = [
    "BlocksState",
    "InstanceSpec",
    "bfs_plan",
    "block_names",
    "builtin_domain",
    "count_configurations",
    "domain_text",
    "enumerate_configurations",
    "generate_suite",
    "make_problem",
    "plan_length_bound",
    "random_instance",
    "sample_configuration",
]

MIN_BLOCKS = 2
MAX_BLOCKS = 26
DEFAULT_BLOCKS = 4


@dataclass(frozen=True)
class BlocksState:
    """Physical view of a Blocksworld state.

    ``towers`` are bottom-to-top stacks kept sorted by bottom block so that
    equal configurations compare equal.
    """

    towers: tuple[tuple[str, ...], ...]
    held: str | None = None

    def __post_init__(self):
        towers = tuple(sorted(tuple(t) for t in self.towers if t))
        object.__setattr__(self, "towers", towers)
        blocks = [b for t in towers for b in t] + ([self.held] if self.held else [])
        if len(blocks) != len(set(blocks)):
            raise ValueError(f"block appears twice in {towers} / held={self.held}")

    @property
    def blocks(self) -> frozenset[str]:
        out = {b for t in self.towers for b in t}
        if self.held:
            out.add(self.held)
        return frozenset(out)

    def to_state(self) -> State:
        atoms = set()
        for tower in self.towers:
            atoms.add(Atom("ontable", (tower[0],)))
            for below, above in zip(tower, tower[1:]):
                atoms.add(Atom("on", (above, below)))
            atoms.add(Atom("clear", (tower[-1],)))
        if self.held:
            atoms.add(Atom("holding", (self.held,)))
        else:
            atoms.add(Atom("handempty"))
        return State(frozenset(atoms))

    def goal_atoms(self) -> frozenset[Atom]:
        """The {on, ontable} atoms that pin this configuration down."""
        return frozenset(a for a in self.to_state().atoms if a.predicate in ("on", "ontable"))

    @classmethod
    def from_state(cls, state: State) -> BlocksState:
        on: dict[str, str] = {}
        table: list[str] = []
        held = []
        for a in state.atoms:
            if a.predicate == "on":
                above, below = a.args
                if below in on.values() or above in on:
                    raise ValueError(f"inconsistent 'on' atoms around {a}")
                on[above] = below
            elif a.predicate == "ontable":
                table.append(a.args[0])
            elif a.predicate == "holding":
                held.append(a.args[0])
        if len(held) > 1:
            raise ValueError("holding more than one block")
        above_of = {below: above for above, below in on.items()}
        towers = []
        seen = set()
        for bottom in table:
            tower = [bottom]
            while tower[-1] in above_of:
                tower.append(above_of[tower[-1]])
                if tower[-1] in seen or tower[-1] in tower[:-1]:
                    raise ValueError("cycle in 'on' atoms")
            seen.update(tower)
            towers.append(tuple(tower))
        if set(on) - seen:
            raise ValueError(f"blocks not grounded on the table: {sorted(set(on) - seen)}")
        bs = cls(tuple(towers), held[0] if held else None)
        if bs.to_state() != state:
            raise ValueError("atom set is not a consistent Blocksworld state")
        return bs


@dataclass(frozen=True)
class InstanceSpec:
    n_blocks: int
    seed: int
    id: str

    def __post_init__(self):
        if not MIN_BLOCKS <= self.n_blocks <= MAX_BLOCKS:
            raise ValueError(f"n_blocks must be in [{MIN_BLOCKS}, {MAX_BLOCKS}], got {self.n_blocks}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def domain_text() -> str:
    return resources.files("plancritique").joinpath("data/blocksworld.pddl").read_text(encoding="utf-8")


def builtin_domain() -> Domain:
    """The standard 4-operator untyped encoding."""

    def atoms(*specs: str) -> frozenset[Atom]:
        out = []
        for spec in specs:
            pred, *args = spec.split()
            out.append(Atom(pred, tuple(args)))
        return frozenset(out)

    actions = {
        "pickup": ActionSchema(
            "pickup",
            ("?x",),
            atoms("clear ?x", "ontable ?x", "handempty"),
            atoms("holding ?x"),
            atoms("ontable ?x", "clear ?x", "handempty"),
        ),
        "putdown": ActionSchema(
            "putdown",
            ("?x",),
            atoms("holding ?x"),
            atoms("ontable ?x", "clear ?x", "handempty"),
            atoms("holding ?x"),
        ),
        "stack": ActionSchema(
            "stack",
            ("?x", "?y"),
            atoms("holding ?x", "clear ?y"),
            atoms("on ?x ?y", "clear ?x", "handempty"),
            atoms("holding ?x", "clear ?y"),
        ),
        "unstack": ActionSchema(
            "unstack",
            ("?x", "?y"),
            atoms("on ?x ?y", "clear ?x", "handempty"),
            atoms("holding ?x", "clear ?y"),
            atoms("on ?x ?y", "clear ?x", "handempty"),
        ),
    }
    predicates = {"clear": 1, "ontable": 1, "handempty": 0, "holding": 1, "on": 2}
    return Domain("blocksworld", predicates, actions)


def block_names(n: int) -> tuple[str, ...]:
    if not MIN_BLOCKS <= n <= MAX_BLOCKS:
        raise ValueError(f"n_blocks must be in [{MIN_BLOCKS}, {MAX_BLOCKS}], got {n}")
    return tuple(string.ascii_lowercase[:n])


def enumerate_configurations(blocks: Sequence[str]) -> Iterator[BlocksState]:
    """Every hand-empty configuration of ``blocks``, each exactly once."""

    def rec(i: int, towers: list[list[str]]):
        if i == len(blocks):
            yield BlocksState(tuple(tuple(t) for t in towers))
            return
        b = blocks[i]
        towers.append([b])
        yield from rec(i + 1, towers)
        towers.pop()
        for t in towers:
            for pos in range(len(t) + 1):
                t.insert(pos, b)
                yield from rec(i + 1, towers)
                del t[pos]

    yield from rec(0, [])


def _lah(n: int, k: int) -> int:
    # configurations of n blocks in exactly k towers
    return comb(n - 1, k - 1) * factorial(n) // factorial(k)


def count_configurations(n: int) -> int:
    return sum(_lah(n, k) for k in range(1, n + 1))


def sample_configuration(blocks: Sequence[str], rng: random.Random) -> BlocksState:
    """Uniform over all hand-empty configurations.

    Draw the tower count k with weight L(n, k), then cut a uniform random
    permutation at k-1 uniform gaps. Every unordered set of k towers is hit
    by exactly k! (permutation, cuts) pairs, so the result is uniform.
    """
    n = len(blocks)
    r = rng.randrange(count_configurations(n))
    k = 1
    while r >= _lah(n, k):
        r -= _lah(n, k)
        k += 1
    perm = rng.sample(list(blocks), n)
    cuts = [0] + sorted(rng.sample(range(1, n), k - 1)) + [n]
    return BlocksState(tuple(tuple(perm[a:b]) for a, b in zip(cuts, cuts[1:])))


def make_problem(name: str, init: BlocksState, goal: BlocksState) -> Problem:
    objects = tuple(sorted(init.blocks))
    if goal.blocks != init.blocks:
        raise ValueError("init and goal configurations use different blocks")
    return Problem(name, "blocksworld", objects, init.to_state(), goal.goal_atoms())


def random_instance(spec: InstanceSpec) -> Problem:
    """Random hand-empty init and a different full-configuration goal, both uniform."""
    rng = random.Random(spec.seed)
    blocks = block_names(spec.n_blocks)
    init = sample_configuration(blocks, rng)
    goal = sample_configuration(blocks, rng)
    while goal == init:
        goal = sample_configuration(blocks, rng)
    return make_problem(spec.id, init, goal)


def bfs_plan(domain: Domain, problem: Problem, max_depth: int) -> Plan | None:
    """Shortest plan by breadth-first search, or None within ``max_depth``.

    Successors are generated in sorted ground-action order, so ties between
    equally short plans resolve the same way every time.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    goal = problem.goal
    start = problem.init.atoms
    if goal <= start:
        return Plan(())
    grounded = []
    for action in ground_actions(domain, problem):
        pre, add, dele = domain.actions[action.name].ground(action.args)
        grounded.append((action, pre, add, dele))
    parents: dict[frozenset, tuple[frozenset | None, GroundAction | None]] = {start: (None, None)}
    frontier = deque([(start, 0)])
    while frontier:
        state, depth = frontier.popleft()
        if depth >= max_depth:
            continue
        for action, pre, add, dele in grounded:
            if not pre <= state:
                continue
            nxt = (state - dele) | add
            if nxt in parents:
                continue
            parents[nxt] = (state, action)
            if goal <= nxt:
                steps = []
                cur = nxt
                while parents[cur][0] is not None:
                    prev, act = parents[cur]
                    steps.append(act)
                    cur = prev
                return Plan(tuple(reversed(steps)))
            frontier.append((nxt, depth + 1))
    return None


def plan_length_bound(n_blocks: int) -> int:
    """Longest shortest plan between hand-empty configurations of ``n_blocks`` blocks.

    Each block moves at most twice (to the table, then into place) and a move
    costs two actions; the block left at the bottom never needs to move.
    """
    return 4 * max(n_blocks - 1, 0)


def generate_suite(count: int, n_blocks: int = DEFAULT_BLOCKS, master_seed: int = 0) -> list[tuple[InstanceSpec, Problem]]:
    """``count`` pairwise-distinct random instances, reproducible from ``master_seed``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    n_configs = count_configurations(n_blocks)
    if count > n_configs * (n_configs - 1):
        raise ValueError(f"only {n_configs * (n_configs - 1)} distinct {n_blocks}-block instances exist")
    rng = random.Random(master_seed)
    width = max(3, len(str(count)))
    suite = []
    seen = set()
    while len(suite) < count:
        spec = InstanceSpec(n_blocks, rng.getrandbits(64), f"bw{n_blocks}-{len(suite) + 1:0{width}d}")
        problem = random_instance(spec)
        key = (problem.init.atoms, problem.goal)
        if key in seen:
            continue
        seen.add(key)
        suite.append((spec, problem))
    return suite


def builtin_domain_from_file() -> Domain:
    return parse_domain(domain_text())
