"""Reference implementations the package is checked against.

Nothing here imports the validator or the PDDL semantics layer. Atoms are
plain tuples like ``("on", "a", "b")``.
"""

from __future__ import annotations

from itertools import product

TABLE = "<table>"


class World:
    """Blocks, what each rests on, and the gripper."""

    def __init__(self, towers, held: str | None = None):
        self.below: dict[str, str] = {}
        for tower in towers:
            prev = TABLE
            for b in tower:
                self.below[b] = prev
                prev = b
        self.held = held

    def copy(self) -> World:
        w = World([])
        w.below = dict(self.below)
        w.held = self.held
        return w

    def is_clear(self, x: str) -> bool:
        return x != self.held and x in self.below and x not in self.below.values()

    def holds(self, atom: tuple) -> bool:
        pred, *args = atom
        if pred == "on":
            return self.below.get(args[0]) == args[1]
        if pred == "ontable":
            return self.below.get(args[0]) == TABLE
        if pred == "clear":
            return self.is_clear(args[0])
        if pred == "holding":
            return self.held == args[0]
        if pred == "handempty":
            return self.held is None
        raise ValueError(pred)

    def atoms(self) -> set[tuple]:
        out = set()
        for b, under in self.below.items():
            out.add(("ontable", b) if under == TABLE else ("on", b, under))
            if self.is_clear(b):
                out.add(("clear", b))
        out.add(("holding", self.held) if self.held else ("handempty",))
        return out


def physical_unmet(world: World, name: str, args: tuple) -> set[tuple]:
    """Preconditions of a Blocksworld move that the world does not satisfy."""
    if name == "pickup":
        (x,) = args
        wanted = [("clear", x), ("ontable", x), ("handempty",)]
    elif name == "putdown":
        (x,) = args
        wanted = [("holding", x)]
    elif name == "stack":
        x, y = args
        wanted = [("holding", x), ("clear", y)]
    elif name == "unstack":
        x, y = args
        wanted = [("on", x, y), ("clear", x), ("handempty",)]
    else:
        raise ValueError(name)
    return {a for a in wanted if not world.holds(a)}


def physical_move(world: World, name: str, args: tuple) -> World:
    w = world.copy()
    if name == "pickup":
        del w.below[args[0]]
        w.held = args[0]
    elif name == "putdown":
        w.below[args[0]] = TABLE
        w.held = None
    elif name == "stack":
        w.below[args[0]] = args[1]
        w.held = None
    elif name == "unstack":
        del w.below[args[0]]
        w.held = args[0]
    return w


def oracle_validate(towers, goal: set[tuple], plan: list[tuple[str, tuple]]) -> dict:
    """Sound execution of ``plan`` in the physical model."""
    world = World(towers)
    for i, (name, args) in enumerate(plan):
        unmet = physical_unmet(world, name, args)
        if unmet:
            return {
                "valid": False,
                "executable": False,
                "first_error_index": i,
                "unmet_preconditions": unmet,
                "unmet_goals": {g for g in goal if not world.holds(g)},
            }
        world = physical_move(world, name, args)
    unmet_goals = {g for g in goal if not world.holds(g)}
    return {
        "valid": not unmet_goals,
        "executable": True,
        "first_error_index": None,
        "unmet_preconditions": set(),
        "unmet_goals": unmet_goals,
    }


# Hand-written STRIPS table for the optimistic regime.
def bw_strips(name: str, args: tuple) -> tuple[set, set, set]:
    if name == "pickup":
        (x,) = args
        return ({("clear", x), ("ontable", x), ("handempty",)}, {("holding", x)}, {("ontable", x), ("clear", x), ("handempty",)})
    if name == "putdown":
        (x,) = args
        return ({("holding", x)}, {("ontable", x), ("clear", x), ("handempty",)}, {("holding", x)})
    if name == "stack":
        x, y = args
        return ({("holding", x), ("clear", y)}, {("on", x, y), ("clear", x), ("handempty",)}, {("holding", x), ("clear", y)})
    if name == "unstack":
        x, y = args
        return ({("on", x, y), ("clear", x), ("handempty",)}, {("holding", x), ("clear", y)}, {("on", x, y), ("clear", x), ("handempty",)})
    raise ValueError(name)


def oracle_optimistic(init: set[tuple], goal: set[tuple], plan: list[tuple[str, tuple]]):
    """Apply every step's effects regardless; report unmet preconditions per step and at the end."""
    state = set(init)
    states = []
    opens = []
    for i, (name, args) in enumerate(plan):
        pre, add, dele = bw_strips(name, args)
        states.append(set(state))
        unmet = pre - state
        if unmet:
            opens.append((i, (name, args), unmet))
        state = (state - dele) | add
    return opens, goal - state, states


def all_ground_moves(blocks) -> list[tuple[str, tuple]]:
    moves = [("pickup", (x,)) for x in blocks] + [("putdown", (x,)) for x in blocks]
    moves += [("stack", (x, y)) for x, y in product(blocks, repeat=2)]
    moves += [("unstack", (x, y)) for x, y in product(blocks, repeat=2)]
    return sorted(moves)


def all_configurations(blocks) -> list[tuple[tuple[str, ...], ...]]:
    """Hand-empty configurations by brute force: every 'what is x on' map that forms stacks."""
    blocks = list(blocks)
    out = set()
    for supports in product([TABLE] + blocks, repeat=len(blocks)):
        below = dict(zip(blocks, supports))
        if any(b == s for b, s in below.items()):
            continue
        supported = [s for s in supports if s != TABLE]
        if len(supported) != len(set(supported)):
            continue
        # every block must reach the table without a cycle
        ok = True
        for b in blocks:
            seen = set()
            cur = b
            while cur != TABLE:
                if cur in seen:
                    ok = False
                    break
                seen.add(cur)
                cur = below[cur]
            if not ok:
                break
        if not ok:
            continue
        above = {s: b for b, s in below.items() if s != TABLE}
        towers = []
        for b in blocks:
            if below[b] == TABLE:
                t = [b]
                while t[-1] in above:
                    t.append(above[t[-1]])
                towers.append(tuple(t))
        out.add(tuple(sorted(towers)))
    return sorted(out)


def config_goal(towers) -> set[tuple]:
    return {a for a in World(towers).atoms() if a[0] in ("on", "ontable")}


def shortest_plan_length(towers, goal: set[tuple], blocks, limit: int) -> int | None:
    """Length of a shortest valid plan by iterative deepening over all move sequences."""
    moves = all_ground_moves(blocks)

    def dfs(world: World, depth: int) -> bool:
        if all(world.holds(g) for g in goal):
            return True
        if depth == 0:
            return False
        for name, args in moves:
            if not physical_unmet(world, name, args):
                if dfs(physical_move(world, name, args), depth - 1):
                    return True
        return False

    start = World(towers)
    for d in range(limit + 1):
        if dfs(start, d):
            return d
    return None
