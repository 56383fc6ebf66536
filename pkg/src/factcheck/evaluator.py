"""Two-direction evaluation of generated text against input triples.

Direction one feeds the text as premise and each rendered fact as
hypothesis; a failed check means the fact is omitted. Direction two feeds
the concatenated facts as premise and the text as hypothesis; a failure
means the text contains hallucinated content. The combination yields the
four-way fine verdict.
"""
from __future__ import annotations

import enum
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .backend import BackendError, NliBackend, NliRequest, check, classify_batch
from .templates import TemplateRegistry
from .types import (
    CheckDirection,
    CheckResult,
    Example,
    Fact,
    FineVerdict,
    Verdict,
)


class CheckMode(enum.Enum):
    BOTH = "both"
    OMISSIONS_ONLY = "omissions"
    HALLUCINATIONS_ONLY = "hallucinations"


@dataclass(frozen=True)
class ExampleResult:
    """Evaluation outcome for one example.

    Either `verdict` is set and `error` is None, or the example failed
    (backend or rendering problem) and `error` holds the reason. `checks`
    lists every performed check, fact checks first, then the text check.
    """

    example_id: str
    facts: tuple[Fact, ...]
    verdict: Verdict | None
    checks: tuple[CheckResult, ...]
    error: str | None = None

    def __post_init__(self) -> None:
        if (self.verdict is None) == (self.error is None):
            raise ValueError("exactly one of verdict and error must be set")


def concatenate_facts(facts: Sequence[Fact]) -> str:
    # Facts carry their own terminal periods, so a single space yields a
    # well-formed multi-sentence premise.
    return " ".join(fact.text for fact in facts)


def check_omissions(text: str, facts: Sequence[Fact], backend: NliBackend) -> list[CheckResult]:
    """One fact-direction check per fact, premise = text, input order."""
    req = NliRequest(pairs=tuple((text, fact.text) for fact in facts))
    return [
        CheckResult(
            direction=CheckDirection.FACT_CHECK,
            premise=text,
            hypothesis=fact.text,
            distribution=dist,
        )
        for fact, dist in zip(facts, classify_batch(req, backend))
    ]


def check_hallucination(facts: Sequence[Fact], text: str, backend: NliBackend) -> CheckResult:
    """Single text-direction check with all facts concatenated as premise."""
    return check(concatenate_facts(facts), text, backend, CheckDirection.TEXT_CHECK)


def evaluate_example(
    ex: Example,
    registry: TemplateRegistry,
    backend: NliBackend,
    mode: CheckMode = CheckMode.BOTH,
    raw_backoff: bool = False,
) -> ExampleResult:
    facts = tuple(registry.render(triple, raw_backoff=raw_backoff) for triple in ex.triples)
    fact_checks: list[CheckResult] = []
    text_check: CheckResult | None = None
    if mode is not CheckMode.HALLUCINATIONS_ONLY:
        fact_checks = check_omissions(ex.text, facts, backend)
    if mode is not CheckMode.OMISSIONS_ONLY:
        text_check = check_hallucination(facts, ex.text, backend)

    omitted = any(not c.passed for c in fact_checks)
    hallucinated = text_check is not None and not text_check.passed
    if omitted and hallucinated:
        fine = FineVerdict.OMISSION_AND_HALLUCINATION
    elif omitted:
        fine = FineVerdict.OMISSION
    elif hallucinated:
        fine = FineVerdict.HALLUCINATION
    else:
        fine = FineVerdict.OK

    checks = tuple(fact_checks) + ((text_check,) if text_check is not None else ())
    verdict = Verdict(
        fine=fine,
        per_fact_passed=tuple(c.passed for c in fact_checks),
        confidence=min(c.distribution.p_entailment for c in checks),
    )
    return ExampleResult(example_id=ex.id, facts=facts, verdict=verdict, checks=checks)


@dataclass(frozen=True)
class RunStats:
    examples: int
    errors: int
    fine_counts: dict[str, int]
    checks: int
    backend_calls: int
    classified_pairs: int
    cache_hits: int
    wall_time_s: float

    def as_dict(self) -> dict[str, object]:
        return {
            "examples": self.examples,
            "errors": self.errors,
            "fine_counts": dict(self.fine_counts),
            "checks": self.checks,
            "backend_calls": self.backend_calls,
            "classified_pairs": self.classified_pairs,
            "cache_hits": self.cache_hits,
            "wall_time_s": self.wall_time_s,
        }


def evaluate_corpus(
    examples: Sequence[Example],
    registry: TemplateRegistry,
    backend: NliBackend,
    mode: CheckMode = CheckMode.BOTH,
    parallelism: int = 1,
    raw_backoff: bool = False,
    fail_fast: bool = False,
) -> tuple[list[ExampleResult], RunStats]:
    """Evaluate every example; results come back in input order.

    Per-example failures become ExampleResult.error entries unless
    fail_fast is set, in which case the first failure propagates.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def evaluate_one(ex: Example) -> ExampleResult:
        try:
            return evaluate_example(ex, registry, backend, mode, raw_backoff)
        except (BackendError, ValueError) as exc:
            if fail_fast:
                raise
            return ExampleResult(
                example_id=ex.id, facts=(), verdict=None, checks=(), error=str(exc)
            )

    before = backend.stats()
    started = time.perf_counter()
    if parallelism == 1 or len(examples) <= 1:
        results = [evaluate_one(ex) for ex in examples]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(evaluate_one, examples))
    wall_time = time.perf_counter() - started
    after = backend.stats()

    fine_counts = Counter(r.verdict.fine.value for r in results if r.verdict is not None)
    stats = RunStats(
        examples=len(results),
        errors=sum(1 for r in results if r.error is not None),
        fine_counts=dict(fine_counts),
        checks=sum(len(r.checks) for r in results),
        backend_calls=after.get("calls", 0) - before.get("calls", 0),
        classified_pairs=after.get("pairs", 0) - before.get("pairs", 0),
        cache_hits=after.get("cache_hits", 0) - before.get("cache_hits", 0),
        wall_time_s=wall_time,
    )
    return results, stats
