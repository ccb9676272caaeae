"""Synthetic transcripts with prescribed outcome distributions."""

from __future__ import annotations

import random

from plancritique.orchestrator import (
    ExperimentMode,
    Iteration,
    LoopConfig,
    StopReason,
    Transcript,
)
from plancritique.pddl import GroundAction, Plan
from plancritique.promptgen import PromptBundle, PromptKind
from plancritique.validator import FeedbackLevel

_PROMPT = PromptBundle("s", "u", PromptKind.GENERATION)
_PLAN = Plan((GroundAction("pickup", ("a",)),))


def transcript(instance_id: str, config: LoopConfig, n_iter: int, truth: bool, verdict) -> Transcript:
    """``n_iter`` iterations; earlier ones rejected and wrong, the last one as given."""
    its = []
    judged = config.mode is not ExperimentMode.GENERATOR_ONLY
    for k in range(1, n_iter + 1):
        last = k == n_iter
        its.append(
            Iteration(
                index=k,
                prompt=_PROMPT,
                raw_response="(pickup a)",
                parsed_plan=_PLAN,
                verifier_verdict=(verdict if last else False) if judged else None,
                verifier_feedback="",
                ground_truth_valid=truth if last else False,
            )
        )
    stop = StopReason.APPROVED if (judged and verdict) else StopReason.EXHAUSTED
    return Transcript(instance_id, config, tuple(its), stop)


def _spread(total_iters: int, fixed: list[int | None], rng: random.Random) -> list[int]:
    """Iteration counts in [1, 15] summing to ``total_iters``; ``fixed`` entries are kept."""
    out = [f if f is not None else 1 for f in fixed]
    free = [i for i, f in enumerate(fixed) if f is None]
    left = total_iters - sum(out)
    assert left >= 0
    while left:
        i = rng.choice(free)
        if out[i] < 15:
            out[i] += 1
            left -= 1
    return out


def suite(mode, level, correct, total, iterations, confusion=None, seed=0) -> list[Transcript]:
    """Transcripts with ``correct`` valid finals out of ``total`` and ``iterations`` in all.

    ``confusion`` = (tp, fp, tn, fn) additionally fixes the final verdicts.
    Rejected finals sit at the 15-iteration budget, as the loop would leave them.
    """
    rng = random.Random(seed)
    config = LoopConfig(mode, level)
    rows: list[tuple[bool, object]] = []
    if confusion is not None:
        tp, fp, tn, fn = confusion
        assert tp + fn == correct and tp + fp + tn + fn == total
        rows = [(True, True)] * tp + [(False, True)] * fp + [(False, False)] * tn + [(True, False)] * fn
    elif mode is ExperimentMode.GENERATOR_ONLY:
        rows = [(True, None)] * correct + [(False, None)] * (total - correct)
    else:
        rows = [(True, True)] * correct + [(False, False)] * (total - correct)
    rng.shuffle(rows)
    budget = config.iteration_budget
    fixed = [None if verdict or budget == 1 else budget for _, verdict in rows]
    if budget == 1:
        fixed = [1] * total
    counts = _spread(iterations, fixed, rng)
    return [transcript(f"i{i:03d}", config, n, truth, verdict) for i, (n, (truth, verdict)) in enumerate(zip(counts, rows))]


M, L = ExperimentMode, FeedbackLevel

# (mode, level, correct, total, iteration sum, confusion)
TABLE_ROWS = [
    (M.LLM_PLUS_LLM, L.FIRST_ERROR, 55, 100, 348, (54, 38, 7, 1)),
    (M.LLM_PLUS_SOUND, L.FIRST_ERROR, 88, 100, 418, None),
    (M.GENERATOR_ONLY, L.NONE, 40, 100, 100, None),
    (M.LLM_PLUS_SOUND, L.BINARY, 37, 50, 269, None),
    (M.LLM_PLUS_SOUND, L.FIRST_ERROR, 43, 50, 209, None),
    (M.LLM_PLUS_SOUND, L.OPEN_CONDITIONS, 43, 50, 221, None),
]

# accuracy and mean-iteration cells as printed
TABLE_CELLS = [("55", "3.48"), ("88", "4.18"), ("40", "1.00"), ("74", "5.38"), ("86", "4.18"), ("86", "4.42")]
