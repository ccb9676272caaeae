"""Accuracy, iteration and verifier-confusion statistics over transcripts.

All rates are exact :class:`~fractions.Fraction` values; rounding happens
only when rendering.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

from .orchestrator import ExperimentMode, Transcript
from .validator import FeedbackLevel

__all__ = [
    "CSV_HEADER",
    "RATE_DECIMALS",
    "ConfusionCounts",
    "ConfusionRates",
    "Outcome",
    "SuiteSummary",
    "classify",
    "confusion",
    "confusion_rates",
    "format_complementary",
    "format_mean",
    "format_percent",
    "render_report",
    "summarize",
]


class Outcome(str, enum.Enum):
    TP = "TP"
    FP = "FP"
    TN = "TN"
    FN = "FN"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def positives_gt(self) -> int:
        return self.tp + self.fn

    @property
    def negatives_gt(self) -> int:
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[Outcome]) -> ConfusionCounts:
        c = Counter(outcomes)
        return cls(c[Outcome.TP], c[Outcome.FP], c[Outcome.TN], c[Outcome.FN])


@dataclass(frozen=True)
class ConfusionRates:
    accuracy: Fraction
    tpr: Fraction
    fpr: Fraction
    tnr: Fraction
    fnr: Fraction


@dataclass(frozen=True)
class SuiteSummary:
    mode: ExperimentMode
    feedback_level: FeedbackLevel
    correct: int
    total: int
    iterations: int
    confusion: ConfusionCounts | None = None

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.correct, self.total)

    @property
    def avg_iterations(self) -> Fraction:
        return Fraction(self.iterations, self.total)


def classify(transcript: Transcript) -> Outcome:
    """Positive means the verifier approved the final plan; truth comes from the validator."""
    verdict = transcript.final_verifier_verdict
    if verdict is None:
        raise ValueError(f"transcript {transcript.instance_id} has no verifier verdict to classify")
    truth = transcript.final_ground_truth
    if verdict:
        return Outcome.TP if truth else Outcome.FP
    return Outcome.FN if truth else Outcome.TN


def confusion(transcripts: Iterable[Transcript]) -> ConfusionCounts:
    return ConfusionCounts.from_outcomes(classify(t) for t in transcripts)


def confusion_rates(c: ConfusionCounts) -> ConfusionRates:
    if c.positives_gt == 0:
        raise ValueError("no ground-truth valid plans: TPR and FNR are undefined")
    if c.negatives_gt == 0:
        raise ValueError("no ground-truth invalid plans: FPR and TNR are undefined")
    return ConfusionRates(
        accuracy=Fraction(c.tp + c.tn, c.total),
        tpr=Fraction(c.tp, c.positives_gt),
        fpr=Fraction(c.fp, c.negatives_gt),
        tnr=Fraction(c.tn, c.negatives_gt),
        fnr=Fraction(c.fn, c.positives_gt),
    )


def summarize(transcripts: Sequence[Transcript]) -> SuiteSummary:
    """Accuracy and mean iteration count; confusion counts when a verifier ran."""
    if not transcripts:
        raise ValueError("no transcripts to summarize")
    keys = {(t.config.mode, t.config.feedback_level) for t in transcripts}
    if len(keys) != 1:
        raise ValueError(f"transcripts mix modes/feedback levels: {sorted((m.value, f.value) for m, f in keys)}")
    mode, level = keys.pop()
    conf = None
    if mode is not ExperimentMode.GENERATOR_ONLY:
        judged = [t for t in transcripts if t.final_verifier_verdict is not None]
        if judged:
            conf = confusion(judged)
    return SuiteSummary(
        mode=mode,
        feedback_level=level,
        correct=sum(t.final_ground_truth for t in transcripts),
        total=len(transcripts),
        iterations=sum(len(t.iterations) for t in transcripts),
        confusion=conf,
    )


# ---------------------------------------------------------------------------
# Formatting

# Decimal places per verifier-rate column. The two complementary pairs use
# different precision in the published layout (98.2 / 1.8 vs 84.45 / 15.55).
RATE_DECIMALS = {"accuracy": 2, "tpr": 1, "fnr": 1, "fpr": 2, "tnr": 2}


def _round(q: Fraction, decimals: int, half_up: bool = True) -> Decimal:
    """Exact rounding of a rational to ``decimals`` places (half-up, or floor)."""
    scaled = q * 10**decimals
    n = math.floor(scaled + Fraction(1, 2)) if half_up else math.floor(scaled)
    return Decimal(n).scaleb(-decimals)


def _strip(d: Decimal) -> str:
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def format_percent(q: Fraction, decimals: int = 2) -> str:
    """Percentage rounded half-up to at most ``decimals`` places, trailing zeros dropped."""
    return _strip(_round(q * 100, decimals))


def format_complementary(q: Fraction, decimals: int) -> tuple[str, str]:
    """Render ``q`` and ``1 - q`` as percentages that add up to exactly 100.

    The smaller of the two is floored at ``decimals`` places and the larger is
    its complement.
    """
    small_d = _round(min(q, 1 - q) * 100, decimals, half_up=False)
    large_d = Decimal(100) - small_d
    if q <= 1 - q:
        return _strip(small_d), _strip(large_d)
    return _strip(large_d), _strip(small_d)


def format_mean(q: Fraction, decimals: int = 2) -> str:
    return format(_round(q, decimals), "f")


MODE_LABELS = {
    ExperimentMode.GENERATOR_ONLY: "Generator only (no backprompting)",
    ExperimentMode.LLM_PLUS_LLM: "LLM+LLM with backprompting",
    ExperimentMode.LLM_PLUS_SOUND: "LLM+sound verifier with backprompting",
    ExperimentMode.LLM_PLUS_NOISY: "LLM+noisy verifier with backprompting",
}

LEVEL_LABELS = {
    FeedbackLevel.NONE: "No feedback",
    FeedbackLevel.BINARY: "Binary",
    FeedbackLevel.FIRST_ERROR: "Binary + first error",
    FeedbackLevel.OPEN_CONDITIONS: "Binary + all errors",
}

CSV_HEADER = ("table", "label", "mode", "feedback_level", "metric", "numerator", "denominator", "value")

NA = "n/a"


def _verifier_rows(label: str, mode: str, level: str, c: ConfusionCounts) -> list[tuple]:
    rows = [("verifier", label, mode, level, "accuracy", c.tp + c.tn, c.total,
             format_percent(Fraction(c.tp + c.tn, c.total), RATE_DECIMALS["accuracy"]))]
    if c.positives_gt:
        tpr, fnr = format_complementary(Fraction(c.tp, c.positives_gt), RATE_DECIMALS["tpr"])
    else:
        tpr = fnr = NA
    if c.negatives_gt:
        fpr, tnr = format_complementary(Fraction(c.fp, c.negatives_gt), RATE_DECIMALS["fpr"])
    else:
        fpr = tnr = NA
    rows += [
        ("verifier", label, mode, level, "tpr", c.tp, c.positives_gt, tpr),
        ("verifier", label, mode, level, "fpr", c.fp, c.negatives_gt, fpr),
        ("verifier", label, mode, level, "tnr", c.tn, c.negatives_gt, tnr),
        ("verifier", label, mode, level, "fnr", c.fn, c.positives_gt, fnr),
    ]
    return rows


def _rows(summaries: Sequence[SuiteSummary], extra: ConfusionCounts | None) -> list[tuple]:
    rows = []
    for s in summaries:
        m, lv = s.mode.value, s.feedback_level.value
        label = f"{MODE_LABELS[s.mode]} / {LEVEL_LABELS[s.feedback_level]}"
        rows.append(("generation", label, m, lv, "accuracy", s.correct, s.total, format_percent(s.accuracy, 2)))
        rows.append(("generation", label, m, lv, "avg_iterations", s.iterations, s.total, format_mean(s.avg_iterations)))
    for s in summaries:
        if s.confusion is not None and s.confusion.total:
            label = f"{MODE_LABELS[s.mode]} / {LEVEL_LABELS[s.feedback_level]}"
            rows += _verifier_rows(label, s.mode.value, s.feedback_level.value, s.confusion)
    if extra is not None:
        rows += _verifier_rows("Verifier", "", "", extra)
    return rows


def _cell(num: int, den: int, value: str) -> str:
    return f"{num}/{den} ({value}%)" if value != NA else f"{num}/{den} ({NA})"


def render_report(
    summaries: Sequence[SuiteSummary],
    confusion_counts: ConfusionCounts | None = None,
    format: str = "markdown",
    meta: Mapping[str, str] | None = None,
) -> str:
    """Deterministic markdown or csv; both carry the same numbers.

    Raw fractions are printed next to every percentage so differing
    denominators stay visible. Summaries without verifier verdicts
    (generator-only runs) get no verifier row; ``confusion_counts`` adds one
    row labelled "Verifier". ``meta`` (for instance the template version)
    is appended as a "Run" section, or as ``meta`` rows in csv.
    """
    rows = _rows(summaries, confusion_counts)
    meta_items = sorted((meta or {}).items())
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
        writer.writerows(("meta", "", "", "", k, "", "", v) for k, v in meta_items)
        return buf.getvalue()
    if format != "markdown":
        raise ValueError(f"unknown report format {format!r}")

    out = [
        "## Plan generation",
        "",
        "| Method | Feedback | Accuracy | Avg. iterations |",
        "|---|---|---|---|",
    ]
    gen = [r for r in rows if r[0] == "generation"]
    for acc, avg in zip(gen[::2], gen[1::2]):
        method, feedback = acc[1].split(" / ")
        out.append(f"| {method} | {feedback} | {_cell(*acc[5:8])} | {avg[7]} |")
    ver = [r for r in rows if r[0] == "verifier"]
    if ver:
        out += [
            "",
            "## Verifier on final plans (ground truth from the sound validator)",
            "",
            "| System | Accuracy | True positive rate | False positive rate | True negative rate | False negative rate |",
            "|---|---|---|---|---|---|",
        ]
        for i in range(0, len(ver), 5):
            group = ver[i : i + 5]
            out.append("| " + " | ".join([group[0][1]] + [_cell(*r[5:8]) for r in group]) + " |")
    if meta_items:
        out += ["", "## Run", ""] + [f"- {k}: {v}" for k, v in meta_items]
    return "\n".join(out) + "\n"
