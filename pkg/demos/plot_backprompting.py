"""
A backprompting loop with scripted agents
=========================================

The loop asks a generator for a plan, passes it to a verifier and, on
rejection, re-prompts with the critique. Scripted agents make the run
reproducible without any model endpoint.
"""

from plancritique.agents import (
    LlmVerifier,
    NoisyVerifier,
    NoisyVerifierConfig,
    ScriptedGenerator,
    SoundVerifier,
)
from plancritique.blocksworld import bfs_plan, builtin_domain, generate_suite
from plancritique.orchestrator import ExperimentMode, LoopConfig, run_instance
from plancritique.promptgen import plan_block
from plancritique.validator import FeedbackLevel

domain = builtin_domain()
(_, query), (_, example) = generate_suite(2, 4, master_seed=7)
example_pair = (example, bfs_plan(domain, example, 12))
answer = plan_block(bfs_plan(domain, query, 12))

# %%
# The generator first replies with prose, then a broken plan, then the
# right one.
def generator():
    return ScriptedGenerator([
        {"response": "Let me think about the towers first."},
        {"response": "(pickup a)\n(stack a b)"},
        {"response": answer},
    ])


# %%
# With the sound verifier the loop stops exactly when the plan is valid.
config = LoopConfig(ExperimentMode.LLM_PLUS_SOUND, FeedbackLevel.FIRST_ERROR)
t = run_instance(config, domain, query, generator(), SoundVerifier(), example_pair, clock=None)
for it in t.iterations:
    print(it.index, it.verifier_verdict, it.ground_truth_valid, "|", it.verifier_feedback)
print(t.stop_reason.value)

# %%
# The last prompt the generator saw carries the critique of its previous
# attempt.
print(t.iterations[-1].prompt.user_text[-600:])

# %%
# A verifier that approves too eagerly ends the loop early on a wrong plan.
# Here the scripted critic says yes to the broken plan.
critic = LlmVerifier(ScriptedGenerator([{"response": "The plan is correct."}]))
t = run_instance(LoopConfig(ExperimentMode.LLM_PLUS_LLM), domain, query, generator(), critic, example_pair, clock=None)
print(t.stop_reason.value, "verifier said", t.final_verifier_verdict, "truth is", t.final_ground_truth)

# %%
# The noisy verifier flips the sound verdict at fixed rates, which is handy
# for measuring how much a loop suffers from false positives.
noisy = NoisyVerifier(NoisyVerifierConfig(fpr=0.8445, fnr=0.018, seed=1), stream=query.name)
t = run_instance(LoopConfig(ExperimentMode.LLM_PLUS_NOISY), domain, query, generator(), noisy, example_pair, clock=None)
print(t.stop_reason.value, len(t.iterations), t.final_ground_truth)
