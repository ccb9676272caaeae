"""
Sampling Blocksworld instances
==============================

Every arrangement of n blocks into towers is drawn with equal probability.
This script counts the arrangements, draws a suite and solves it with the
breadth-first oracle.
"""

import collections
import random

from plancritique.blocksworld import (
    bfs_plan,
    block_names,
    builtin_domain,
    count_configurations,
    generate_suite,
    plan_length_bound,
    sample_configuration,
)
from plancritique.validator import validate

# %%
# The number of configurations grows quickly: 13 for three blocks,
# 73 for four and 501 for five.
for n in range(1, 7):
    print(n, count_configurations(n))

# %%
# Draw many three-block configurations and tally them. Each of the 13
# arrangements should come up roughly 1/13 of the time.
rng = random.Random(0)
tally = collections.Counter(sample_configuration(block_names(3), rng) for _ in range(13_000))
for state, hits in sorted(tally.items(), key=lambda kv: -kv[1]):
    print(f"{hits:5d}  {state.towers}")

# %%
# A suite is fixed by (count, blocks, seed). The same triple always gives
# the same problems, so suites never need to be shipped around.
domain = builtin_domain()
suite = generate_suite(10, 4, master_seed=3)
lengths = []
for spec, problem in suite:
    plan = bfs_plan(domain, problem, plan_length_bound(4))
    assert validate(domain, problem, plan).valid
    lengths.append(len(plan.steps))
    print(spec.id, len(plan.steps), " ".join(str(a) for a in plan.steps))

# %%
# Moving one block costs two actions, so no shortest plan is longer
# than 4(n-1) steps.
print("longest:", max(lengths), "bound:", plan_length_bound(4))
