import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plancritique.pddl import GroundAction, Plan, ground_actions
from plancritique.promptgen import (
    EXAMPLE_MARKER,
    ParseFailure,
    PromptBundle,
    PromptKind,
    Templates,
    backprompt,
    generation_prompt,
    parse_plan_response,
    parse_verifier_response,
    plan_block,
    verification_prompt,
)

from .conftest import bw_problem, golden


@pytest.fixture
def example():
    return bw_problem([["a"], ["b"], ["c"]], [["b", "a"], ["c"]], name="example")


@pytest.fixture
def example_plan():
    return Plan((GroundAction("pickup", ("a",)), GroundAction("stack", ("a", "b"))))


@pytest.fixture
def query():
    return bw_problem([["c", "b"], ["a"]], [["a", "b", "c"]], name="query")


def P(*steps):
    return Plan(tuple(GroundAction(s[0], tuple(s[1:])) for s in steps))


# -- generation --------------------------------------------------------------


def test_generation_prompt_golden(bw, example, example_plan, query):
    bundle = generation_prompt(bw, (example, example_plan), query)
    again = generation_prompt(bw, (example, example_plan), query)
    assert bundle == again and bundle.digest() == again.digest()
    assert bundle.kind is PromptKind.GENERATION
    text = bundle.user_text
    # domain, then example with its plan, then the query
    i_dom = text.index("pick up")
    i_ex = text.index(EXAMPLE_MARKER)
    i_plan = text.index("(pickup a)\n(stack a b)")
    i_q = text.index("[QUERY INSTANCE]")
    assert i_dom < i_ex < i_plan < i_q
    golden("prompt_generation.txt", bundle.system_text + "\n=====\n" + bundle.user_text)


def test_generation_prompt_empty_example_plan(bw, query):
    solved = bw_problem([["a"], ["b"]], [["a"], ["b"]], name="solved")
    bundle = generation_prompt(bw, (solved, Plan(())), query)
    assert "no actions needed" in bundle.user_text


def test_generation_prompt_rejects_bad_example(bw, example, query):
    with pytest.raises(ValueError):
        generation_prompt(bw, (example, P(("stack", "a", "b"))), query)
    with pytest.raises(ValueError):
        generation_prompt(bw, (query, Plan(())), query)


# -- verification ------------------------------------------------------------


def test_verification_prompt_zero_shot(bw, query):
    plan = P(("unstack", "b", "c"), ("putdown", "b"))
    bundle = verification_prompt(bw, query, plan)
    assert bundle == verification_prompt(bw, query, plan)
    assert bundle.user_text.count(EXAMPLE_MARKER) == 0
    assert bundle.system_text.count(EXAMPLE_MARKER) == 0
    assert "(unstack b c)\n(putdown b)" in bundle.user_text
    assert "valid" in bundle.user_text.lower()
    golden("prompt_verification.txt", bundle.system_text + "\n=====\n" + bundle.user_text)


# -- backprompt --------------------------------------------------------------


def test_backprompt_golden(bw, example, example_plan, query):
    base = generation_prompt(bw, (example, example_plan), query)
    fb = "The plan is invalid. Action 1 is not executable."
    bundle = backprompt(fb, query, base, [("(pickup b)", fb)])
    assert bundle == backprompt(fb, query, base, [("(pickup b)", fb)])
    assert bundle.kind is PromptKind.BACKPROMPT
    assert bundle.user_text.startswith(base.user_text.rstrip("\n"))
    assert fb in bundle.user_text and "(pickup b)" in bundle.user_text
    golden("prompt_backprompt.txt", bundle.system_text + "\n=====\n" + bundle.user_text)


def test_backprompt_empty_feedback_still_asks_for_new_plan(query):
    bundle = backprompt("", query)
    text = bundle.user_text.lower()
    assert "invalid" in text and "new plan" in text
    assert "[PREVIOUS PLAN]" not in bundle.user_text


def test_bundle_serialization(bw, query):
    b = verification_prompt(bw, query, Plan(()))
    assert PromptBundle.from_dict(b.to_dict()) == b
    assert b.messages() == [
        {"role": "system", "content": b.system_text},
        {"role": "user", "content": b.user_text},
    ]


def test_template_override(tmp_path, bw, query):
    (tmp_path / "verification_system.txt").write_text("Check it.\n")
    t = Templates(tmp_path)
    assert t.version.startswith("1+")
    assert verification_prompt(bw, query, Plan(()), t).system_text.startswith("Check it.")


def test_template_override_rejects_unknown_files(tmp_path):
    (tmp_path / "nonsense.txt").write_text("x")
    with pytest.raises(ValueError):
        Templates(tmp_path)


# -- parse_plan_response -----------------------------------------------------


def test_parse_canonical(bw, query):
    assert parse_plan_response("(pickup a)\n(stack a b)", bw, query) == P(("pickup", "a"), ("stack", "a", "b"))


def test_parse_tolerant_list_in_prose(bw, query):
    text = (
        "Sure! Here is my plan:\n\n"
        "1. Pickup a\n"
        "2. stack a b\n\n"
        "This should achieve the goal."
    )
    assert parse_plan_response(text, bw, query) == P(("pickup", "a"), ("stack", "a", "b"))


def test_parse_takes_last_block(bw, query):
    text = "[PLAN]\n(pickup c)\n[PLAN END]\nOn reflection:\n[PLAN]\n- (pick-up a)\n- (stack a b)\n[PLAN END]"
    assert parse_plan_response(text, bw, query) == P(("pickup", "a"), ("stack", "a", "b"))


def test_parse_fenced_code(bw, query):
    text = "```\n(unstack b c)\n(putdown b)\n```"
    assert parse_plan_response(text, bw, query) == P(("unstack", "b", "c"), ("putdown", "b"))


@pytest.mark.parametrize(
    "text, reason",
    [
        ("I don't know how to do this.", "unparseable"),
        ("", "unparseable"),
        ("(fly a)", "unknown_action"),
        ("(pickup z)", "unknown_object"),
        ("(pickup a b)", "arity"),
    ],
)
def test_parse_failures(bw, query, text, reason):
    out = parse_plan_response(text, bw, query)
    assert isinstance(out, ParseFailure)
    assert out.reason == reason and out.raw_text == text
    assert not out


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_canonical_plan_round_trip(data):
    from plancritique.blocksworld import builtin_domain

    bw = builtin_domain()
    query = bw_problem([["c", "b"], ["a"]], [["a", "b", "c"]], name="query")
    steps = data.draw(st.lists(st.sampled_from(ground_actions(bw, query)), min_size=1, max_size=8))
    plan = Plan(tuple(steps))
    prefix = data.draw(st.sampled_from(["", "Here is the plan.\n", "[PLAN]\n"]))
    suffix = data.draw(st.sampled_from(["", "\n[PLAN END]", "\nDone."]))
    assert parse_plan_response(prefix + plan_block(plan) + suffix, bw, query) == plan


# -- parse_verifier_response -------------------------------------------------


@pytest.mark.parametrize(
    "text, verdict",
    [
        ("The plan is valid.", True),
        ("The plan is correct and achieves the goal.", True),
        ("The plan is not valid because step 2 fails.", False),
        ("The plan is invalid.", False),
        ("This plan isn't correct.", False),
        ("Step 3 is incorrect.", False),
        ("The plan fails to achieve the goal.", False),
        ("Looks valid, but action 2 is not executable.", False),
        ("I cannot tell.", None),
        ("", None),
    ],
)
def test_verifier_verdicts(text, verdict):
    parsed = parse_verifier_response(text)
    assert parsed.verdict is verdict
    assert parsed.critique_text == text


NEGATED = st.builds(
    lambda lead, neg, fill, word, tail: f"{lead}{neg} {fill}{word}{tail}",
    st.sampled_from(["", "The plan ", "Honestly, this ", "VALID? "]),
    st.sampled_from(["is not", "isn't", "is never", "not", "Not"]),
    st.sampled_from(["", "a ", "considered ", "entirely "]),
    st.sampled_from(["valid", "correct", "Valid", "CORRECT"]),
    st.sampled_from(["", ".", " at all.", " - the plan is valid otherwise"]),
)


@settings(max_examples=300)
@given(NEGATED)
def test_negated_markers_never_approve(text):
    assert parse_verifier_response(text).verdict is not True
