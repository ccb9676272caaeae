import random
from collections import Counter

import pytest

from plancritique.blocksworld import (
    BlocksState,
    InstanceSpec,
    bfs_plan,
    block_names,
    builtin_domain,
    count_configurations,
    enumerate_configurations,
    generate_suite,
    make_problem,
    plan_length_bound,
    random_instance,
    sample_configuration,
)
from plancritique.pddl import (
    Atom,
    GroundAction,
    Plan,
    parse_domain,
    print_domain,
    print_problem,
)
from plancritique.validator import validate

from .conftest import bw_problem
from .oracles import World, all_configurations


def test_builtin_domain_shape():
    d = builtin_domain()
    assert len(d.actions) == 4
    for schema in d.actions.values():
        assert not schema.add & schema.delete
    assert parse_domain(print_domain(d)) == d


def test_configuration_counts_match_brute_force():
    for n in range(2, 6):
        brute = all_configurations(block_names(n))
        ours = sorted(s.towers for s in enumerate_configurations(block_names(n)))
        assert ours == brute
        assert count_configurations(n) == len(brute)
    # a(3) = 13, a(4) = 73, a(5) = 501
    assert [count_configurations(n) for n in (3, 4, 5)] == [13, 73, 501]


def test_blocks_state_round_trip():
    for bs in enumerate_configurations("abcd"):
        s = bs.to_state()
        assert BlocksState.from_state(s) == bs
        assert {(a.predicate, *a.args) for a in s.atoms} == World(bs.towers).atoms()
    held = BlocksState((("a", "b"),), held="c")
    assert BlocksState.from_state(held.to_state()) == held


@pytest.mark.parametrize(
    "atoms",
    [
        {Atom("on", ("a", "b")), Atom("on", ("b", "a")), Atom("handempty", ())},
        {Atom("ontable", ("a",)), Atom("handempty", ())},  # a is clear but the atom is missing
        {Atom("ontable", ("a",)), Atom("clear", ("a",)), Atom("holding", ("b",)), Atom("holding", ("c",))},
    ],
)
def test_from_state_rejects_inconsistent(atoms):
    from plancritique.pddl import State

    with pytest.raises(ValueError):
        BlocksState.from_state(State(frozenset(atoms)))


def test_random_instance_deterministic_and_goal_differs():
    for seed in range(200):
        spec = InstanceSpec(3, seed, f"s{seed}")
        p, q = random_instance(spec), random_instance(spec)
        assert p == q and print_problem(p) == print_problem(q)
        assert BlocksState.from_state(p.init).goal_atoms() != p.goal
        assert all(a.predicate in ("on", "ontable") for a in p.goal)
        BlocksState.from_state(p.init)  # consistent


def test_init_distribution_uniform_over_13_configurations():
    counts = Counter(BlocksState.from_state(random_instance(InstanceSpec(3, s, "x")).init).towers for s in range(1000))
    assert len(counts) == 13
    expected = 1000 / 13
    chi2 = sum((counts[c] - expected) ** 2 / expected for c in all_configurations("abc"))
    # 12 degrees of freedom; 32.91 is the 0.999 quantile, so a correct sampler fails 1 in 1000 seeds-sets
    assert chi2 < 32.91, chi2


def test_sampler_large_n_uniform_tower_count():
    # for n = 4 the tower-count distribution is L(4,k)/73 = 24/73, 36/73, 12/73, 1/73
    rng = random.Random(3)
    ks = Counter(len(sample_configuration("abcd", rng).towers) for _ in range(20000))
    for k, w in {1: 24, 2: 36, 3: 12, 4: 1}.items():
        assert abs(ks[k] / 20000 - w / 73) < 0.015


def test_instance_spec_bounds():
    with pytest.raises(ValueError):
        InstanceSpec(1, 0, "x")
    with pytest.raises(ValueError):
        InstanceSpec(3, -1, "x")


def test_bfs_goal_in_init():
    p = bw_problem([["a"], ["b"]], [["a"], ["b"]])
    assert bfs_plan(builtin_domain(), p, 0) == Plan(())


def test_bfs_two_blocks():
    p = bw_problem([["a"], ["b"]], [["b", "a"]])
    plan = bfs_plan(builtin_domain(), p, 4)
    assert plan.steps == (GroundAction("pickup", ("a",)), GroundAction("stack", ("a", "b")))


def test_bfs_unreachable_goal():
    from dataclasses import replace

    p = replace(bw_problem([["a"], ["b"]], [["b", "a"]]), goal=frozenset({Atom("on", ("a", "a"))}))
    assert bfs_plan(builtin_domain(), p, 6) is None


def test_bfs_depth_limit():
    p = bw_problem([["a"], ["b"]], [["b", "a"]])
    assert bfs_plan(builtin_domain(), p, 1) is None
    with pytest.raises(ValueError):
        bfs_plan(builtin_domain(), p, -1)


def test_generate_suite_contract():
    d = builtin_domain()
    suite = generate_suite(100, 4, 7)
    assert len(suite) == 100
    assert len({(p.init, p.goal) for _, p in suite}) == 100
    assert len({s.id for s, _ in suite}) == 100
    again = generate_suite(100, 4, 7)
    assert [print_problem(p) for _, p in suite] == [print_problem(p) for _, p in again]
    assert [s for s, _ in suite] == [s for s, _ in again]
    for spec, p in suite:
        plan = bfs_plan(d, p, plan_length_bound(spec.n_blocks))
        assert plan is not None and validate(d, p, plan).valid


def test_plan_length_bound_is_tight():
    # a 2n bound is too small for this encoding: every block move costs two actions
    d = builtin_domain()
    for n in (2, 3):
        configs = list(enumerate_configurations(block_names(n)))
        lengths = [len(bfs_plan(d, make_problem("x", a, b), plan_length_bound(n))) for a in configs for b in configs]
        assert max(lengths) == plan_length_bound(n) == 4 * (n - 1)
    # reversing a 4-tower is only 8 steps since the top block becomes the new bottom
    tower = BlocksState((("a", "b", "c", "d"),))
    assert len(bfs_plan(d, make_problem("x", tower, BlocksState((("d", "c", "b", "a"),))), 12)) == 8


def test_generate_suite_rejects_impossible_sizes():
    with pytest.raises(ValueError):
        generate_suite(0)
    with pytest.raises(ValueError):
        generate_suite(3 * 2 + 1, n_blocks=2)  # only 3*2 distinct ordered pairs exist


def test_make_problem_requires_same_blocks():
    with pytest.raises(ValueError):
        make_problem("x", BlocksState((("a",),)), BlocksState((("b",),)))
