"""Shared domain types: triples, facts, NLI distributions, and verdicts.

All types are immutable value objects and validate their invariants at
construction time, so a constructed instance is always internally consistent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

# Absolute tolerance for the three NLI probabilities summing to one; absorbs
# rounding introduced by the serving side.
PROB_SUM_TOLERANCE = 1e-4


class NliLabel(str, Enum):
    """Three-way NLI outcome. Declaration order is the tie-break order."""

    CONTRADICTION = "contradiction"
    NEUTRAL = "neutral"
    ENTAILMENT = "entailment"


class FineVerdict(str, Enum):
    """Four-way per-example verdict."""

    OK = "OK"
    OMISSION = "omission"
    HALLUCINATION = "hallucination"
    OMISSION_AND_HALLUCINATION = "omission+hallucination"


class RoughVerdict(str, Enum):
    """Two-way collapse of the fine verdict: anything not OK is not_OK."""

    OK = "OK"
    NOT_OK = "not_OK"


class CheckDirection(str, Enum):
    FACT_CHECK = "fact_check"  # text as premise, one fact as hypothesis
    TEXT_CHECK = "text_check"  # concatenated facts as premise, text as hypothesis


@dataclass(frozen=True)
class Triple:
    """One subject-predicate-object input fact.

    Fields are kept verbatim; equality is exact string equality with no
    normalization at this layer.
    """

    subject: str
    predicate: str
    object: str

    def __post_init__(self) -> None:
        for name in ("subject", "predicate", "object"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"triple {name} must be a non-empty string")


@dataclass(frozen=True)
class Fact:
    """A triple rendered to one natural-language sentence."""

    text: str
    source: Triple
    template_id: str
    used_backoff: bool

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("fact text must be non-empty")
        if not self.text.endswith(".") or self.text.endswith(".."):
            raise ValueError("fact text must end with exactly one period")
        if self.used_backoff:
            # Backoff output embeds the raw values; compare modulo the
            # surrounding-whitespace/terminal-period normalization applied
            # when the sentence is assembled.
            for value in (self.source.subject, self.source.object):
                needle = value.strip().rstrip(".")
                if needle and needle not in self.text:
                    raise ValueError(
                        "backoff fact must contain subject and object verbatim"
                    )


@dataclass(frozen=True)
class NliDistribution:
    """Probability distribution over the three NLI labels."""

    p_contradiction: float
    p_neutral: float
    p_entailment: float

    def __post_init__(self) -> None:
        total = 0.0
        for name, p in self.as_mapping().items():
            if not isinstance(p, (int, float)) or math.isnan(p) or not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {name}={p!r} outside [0, 1]")
            total += p
        if abs(total - 1.0) > PROB_SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {total!r}, not 1 +/- {PROB_SUM_TOLERANCE}")

    def as_mapping(self) -> dict[str, float]:
        return {
            "contradiction": self.p_contradiction,
            "neutral": self.p_neutral,
            "entailment": self.p_entailment,
        }


def label_argmax(d: NliDistribution) -> NliLabel:
    """Label with the strictly greatest probability.

    Exact ties resolve to the earliest label in (contradiction, neutral,
    entailment) order, so a tie never counts as entailment. This is a
    deliberate conservative choice: a borderline result is flagged for
    review instead of passing silently.
    """
    probs = (d.p_contradiction, d.p_neutral, d.p_entailment)
    labels = (NliLabel.CONTRADICTION, NliLabel.NEUTRAL, NliLabel.ENTAILMENT)
    # max() keeps the first of equal keys, which is exactly the tie rule.
    best = max(range(3), key=lambda i: probs[i])
    return labels[best]


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one NLI check. `passed` is derived, never supplied."""

    direction: CheckDirection
    premise: str
    hypothesis: str
    distribution: NliDistribution
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        d = self.distribution
        passed = d.p_entailment > d.p_contradiction and d.p_entailment > d.p_neutral
        object.__setattr__(self, "passed", passed)


def rough_from_fine(fine: FineVerdict) -> RoughVerdict:
    return RoughVerdict.OK if fine is FineVerdict.OK else RoughVerdict.NOT_OK


_OMISSION_BEARING = (FineVerdict.OMISSION, FineVerdict.OMISSION_AND_HALLUCINATION)


@dataclass(frozen=True)
class Verdict:
    """Per-example result: fine/rough verdicts, per-fact flags, confidence.

    `per_fact_passed` is empty when no omission-direction checks were
    performed (hallucinations-only mode). `confidence` is the minimum
    entailment probability over all checks that were run.
    """

    fine: FineVerdict
    per_fact_passed: tuple[bool, ...]
    confidence: float
    rough: RoughVerdict | None = None

    def __post_init__(self) -> None:
        if self.rough is None:
            object.__setattr__(self, "rough", rough_from_fine(self.fine))
        elif self.rough is not rough_from_fine(self.fine):
            raise ValueError(f"rough={self.rough.value} inconsistent with fine={self.fine.value}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence!r} outside [0, 1]")
        omission_flagged = self.fine in _OMISSION_BEARING
        if self.per_fact_passed:
            if omission_flagged != (not all(self.per_fact_passed)):
                raise ValueError("fine verdict inconsistent with per-fact check flags")
        elif omission_flagged:
            raise ValueError("omission verdict without any omission-direction checks")


@dataclass(frozen=True)
class GoldLabel:
    """Ground-truth annotation; fine-grained part is optional."""

    rough: RoughVerdict
    fine: FineVerdict | None = None

    def __post_init__(self) -> None:
        if self.fine is not None and rough_from_fine(self.fine) is not self.rough:
            raise ValueError(f"gold rough={self.rough.value} inconsistent with fine={self.fine.value}")


@dataclass(frozen=True)
class Example:
    """One evaluation instance: input triples plus the generated text."""

    id: str
    triples: tuple[Triple, ...]
    text: str
    gold: GoldLabel | None = None
    human_score: float | None = None

    def __post_init__(self) -> None:
        if not self.triples:
            raise ValueError("example must have at least one triple")
        if not self.text.strip():
            raise ValueError("example text must be non-empty")
