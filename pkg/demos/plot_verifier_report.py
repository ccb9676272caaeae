"""
Measuring a verifier
====================

Run a whole suite with a noisy verifier, persist the transcripts and turn
them into the plan-generation and confusion-matrix tables.
"""

import random
import tempfile
from pathlib import Path

from plancritique.agents import NoisyVerifier, NoisyVerifierConfig, ScriptedGenerator
from plancritique.blocksworld import bfs_plan, builtin_domain, generate_suite
from plancritique.orchestrator import (
    AgentFactory,
    ExperimentMode,
    LoopConfig,
    TranscriptStore,
    run_suite,
)
from plancritique.pddl import Plan
from plancritique.promptgen import plan_block
from plancritique.reporting import render_report, summarize

domain = builtin_domain()
problems = [p for _, p in generate_suite(40, 4, master_seed=11)]
by_id = {p.name: p for p in problems}

# %%
# A stand-in generator: it gets each instance right with probability 0.4
# per attempt and otherwise drops a step from the right plan.
def make_generator(instance_id):
    rng = random.Random(instance_id)
    steps = bfs_plan(domain, by_id[instance_id], 12).steps
    replies = []
    for _ in range(15):
        if rng.random() < 0.4 or len(steps) < 2:
            replies.append(plan_block(Plan(steps)))
        else:
            cut = rng.randrange(len(steps))
            replies.append(plan_block(Plan(steps[:cut] + steps[cut + 1 :])))
    return ScriptedGenerator([{"response": r} for r in replies])


# %%
# The verifier approves 84% of wrong plans and rejects about 2% of right
# ones. Each instance gets its own random stream, so results do not depend
# on thread scheduling.
noisy = NoisyVerifierConfig(fpr=0.8445, fnr=0.018, seed=5)
agents = AgentFactory(make_generator, lambda iid: NoisyVerifier(noisy, iid))
out = Path(tempfile.mkdtemp()) / "noisy"
transcripts = run_suite(
    LoopConfig(ExperimentMode.LLM_PLUS_NOISY),
    domain,
    problems,
    agents,
    parallelism=4,
    store=TranscriptStore(out),
    clock=None,
)

# %%
# Every rate is an exact fraction until it is printed. Since the loop only
# stops early on approval, the final plans are mostly approved ones, and
# the false positive rate on them is what matters.
summary = summarize(transcripts)
print(summary.accuracy, summary.avg_iterations, summary.confusion)
print(render_report([summary]))
print(render_report([summary], format="csv"))
