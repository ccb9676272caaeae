"""
Checking a plan against a domain
================================

Parse the bundled Blocksworld domain, write a small problem by hand and
run a few candidate plans through the validator at every feedback level.
"""

from plancritique.blocksworld import BlocksState, domain_text, make_problem
from plancritique.pddl import parse_domain, parse_plan, print_problem
from plancritique.validator import FeedbackLevel, check, feedback_to_text

# %%
# The domain ships with the package. Parsing it gives schemas with
# precondition, add and delete sets.
domain = parse_domain(domain_text())
for schema in domain.actions.values():
    print(schema.name, schema.params)

# %%
# Towers are listed bottom first. Here a, b and c start on the table and
# the goal is the tower c-b-a.
problem = make_problem(
    "demo",
    BlocksState((("a",), ("b",), ("c",))),
    BlocksState((("c", "b", "a"),)),
)
print(print_problem(problem))

# %%
# One good plan and two broken ones. The second forgets to pick a block up,
# the third stops short of the goal.
candidates = {
    "good": "(pickup b)\n(stack b c)\n(pickup a)\n(stack a b)",
    "skips a pickup": "(pickup b)\n(stack b c)\n(stack a b)",
    "too short": "(pickup b)\n(stack b c)",
}

for label, text in candidates.items():
    plan = parse_plan(text, domain, problem)
    print(f"--- {label}")
    for level in FeedbackLevel:
        result, feedback = check(domain, problem, plan, level)
        print(f"[{level.value}] {feedback_to_text(feedback, domain)}")

# %%
# The validation record keeps the state before and after every step, so the
# halting point of a broken plan is easy to inspect.
result, _ = check(domain, problem, parse_plan(candidates["skips a pickup"], domain, problem), FeedbackLevel.BINARY)
err = result.first_error
print(err.index, err.action, sorted(str(a) for a in err.unmet_preconditions))
print(sorted(str(a) for a in err.state_before))
