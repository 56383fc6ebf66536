"""Result serialization and human-readable score output.

Per-example NLI distributions are always persisted so failed checks can
be inspected after the fact. Result files never contain timing; run
timing lives in the separate stats footer, keeping result files
byte-identical across reruns.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .evaluator import ExampleResult, RunStats
from .ingestion import InputParseError
from .metrics import PredictedLabel, ScoreReport
from .types import Example, FineVerdict, RoughVerdict

_FINE_BY_NAME = {v.value: v for v in FineVerdict}
_ROUGH_BY_NAME = {v.value: v for v in RoughVerdict}


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a sibling temp file + rename so readers never see a
    truncated file and failed runs leave nothing behind."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def result_to_dict(result: ExampleResult) -> dict[str, object]:
    if result.error is not None:
        return {"id": result.example_id, "error": result.error}
    verdict = result.verdict
    assert verdict is not None
    return {
        "id": result.example_id,
        "fine": verdict.fine.value,
        "rough": verdict.rough.value,
        "confidence": verdict.confidence,
        "per_fact_passed": list(verdict.per_fact_passed),
        "facts": [
            {"text": f.text, "template_id": f.template_id, "used_backoff": f.used_backoff}
            for f in result.facts
        ],
        "checks": [
            {
                "direction": c.direction.value,
                "premise": c.premise,
                "hypothesis": c.hypothesis,
                "contradiction": c.distribution.p_contradiction,
                "neutral": c.distribution.p_neutral,
                "entailment": c.distribution.p_entailment,
                "passed": c.passed,
            }
            for c in result.checks
        ],
    }


def results_to_jsonl(results: Iterable[ExampleResult]) -> str:
    return "".join(json.dumps(result_to_dict(r), ensure_ascii=False) + "\n" for r in results)


def write_results_jsonl(results: Sequence[ExampleResult], path: str | Path) -> None:
    atomic_write_text(path, results_to_jsonl(results))


def write_run_stats(stats: RunStats, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(stats.as_dict(), ensure_ascii=False, indent=2) + "\n")


class ResultRecord:
    """One results-file line, parsed back for scoring."""

    __slots__ = ("example_id", "fine", "rough", "confidence", "per_fact_passed", "n_facts", "error")

    def __init__(
        self,
        example_id: str,
        fine: FineVerdict | None,
        rough: RoughVerdict | None,
        confidence: float | None,
        per_fact_passed: tuple[bool, ...],
        n_facts: int,
        error: str | None,
    ):
        self.example_id = example_id
        self.fine = fine
        self.rough = rough
        self.confidence = confidence
        self.per_fact_passed = per_fact_passed
        self.n_facts = n_facts
        self.error = error

    def to_predicted(self) -> PredictedLabel:
        return PredictedLabel(example_id=self.example_id, rough=self.rough, fine=self.fine)


def read_results_jsonl(lines: Iterable[str]) -> list[ResultRecord]:
    records: list[ResultRecord] = []
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InputParseError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or "id" not in obj:
            raise InputParseError(f"line {lineno}: expected an object with an 'id' field")
        example_id = str(obj["id"])
        if "error" in obj:
            records.append(ResultRecord(example_id, None, None, None, (), 0, str(obj["error"])))
            continue
        try:
            fine = _FINE_BY_NAME[obj["fine"]]
            rough = _ROUGH_BY_NAME[obj["rough"]]
            confidence = float(obj["confidence"])
            per_fact = tuple(bool(b) for b in obj.get("per_fact_passed", []))
            n_facts = len(obj.get("facts", per_fact))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputParseError(f"line {lineno}: malformed result: {exc!r}") from exc
        records.append(ResultRecord(example_id, fine, rough, confidence, per_fact, n_facts, None))
    return records


def example_to_dict(ex: Example) -> dict[str, object]:
    obj: dict[str, object] = {
        "id": ex.id,
        "triples": [[t.subject, t.predicate, t.object] for t in ex.triples],
        "text": ex.text,
    }
    if ex.gold is not None:
        gold: dict[str, str] = {"rough": ex.gold.rough.value}
        if ex.gold.fine is not None:
            gold["fine"] = ex.gold.fine.value
        obj["gold"] = gold
    if ex.human_score is not None:
        obj["human_score"] = ex.human_score
    return obj


def write_examples_jsonl(examples: Sequence[Example], path: str | Path) -> None:
    atomic_write_text(
        path, "".join(json.dumps(example_to_dict(ex), ensure_ascii=False) + "\n" for ex in examples)
    )


def _fmt(value: float | str | None) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, str):
        return value
    return f"{value:.3f}"


def format_score_table(
    report: ScoreReport,
    confidence_rho: float | str | None = None,
    error_size_rho: float | str | None = None,
) -> str:
    """Aligned text table; Af appears only when fine gold was available."""
    columns: list[tuple[str, float | str | None]] = []
    if report.accuracy_fine is not None:
        columns.append(("Af", report.accuracy_fine))
        columns.append(("Ar", report.accuracy_rough))
    else:
        columns.append(("A", report.accuracy_rough))
    columns.extend([("R", report.recall), ("P", report.precision), ("F1", report.f1)])
    if confidence_rho is not None:
        columns.append(("rho", confidence_rho))
    width = 8
    lines = [
        "".join(name.rjust(width) for name, _ in columns),
        "".join(_fmt(value).rjust(width) for _, value in columns),
        f"n: {report.n}  excluded: {report.n_excluded}",
    ]
    if error_size_rho is not None:
        lines.append(f"error-vs-size rho: {_fmt(error_size_rho)}")
    return "\n".join(lines) + "\n"


def score_report_to_dict(
    report: ScoreReport,
    confidence_rho: float | None = None,
    confidence_rho_p: float | None = None,
    error_size_rho: float | None = None,
) -> dict[str, object]:
    payload = report.as_dict()
    payload["confidence_vs_score_rho"] = confidence_rho
    payload["confidence_vs_score_p_approx"] = confidence_rho_p
    payload["error_vs_size_rho"] = error_size_rho
    return payload
