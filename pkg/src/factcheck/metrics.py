"""Scoring against gold labels and rank-correlation analyses.

Precision/recall/F1 treat not_OK as the positive class: the metric's job
is to find semantically inaccurate outputs, so a "positive" is a caught
error. Zero-denominator cases are defined as 0.0 and warned about rather
than raising.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from scipy.stats import t as _student_t

from .types import FineVerdict, GoldLabel, RoughVerdict

_FINE_ORDER = tuple(v.value for v in FineVerdict)


class MetricWarning(UserWarning):
    """Degenerate but well-defined metric situation (e.g. no positives)."""


class GoldMismatchError(ValueError):
    """Result ids that have no entry in the reference mapping."""

    def __init__(self, what: str, ids: Sequence[str]):
        shown = ", ".join(ids[:5])
        more = f" (+{len(ids) - 5} more)" if len(ids) > 5 else ""
        super().__init__(f"{len(ids)} result ids missing from {what}: {shown}{more}")
        self.ids = tuple(ids)


class CorrelationUndefinedError(ValueError):
    """Rank correlation is undefined (a vector is constant)."""


@dataclass(frozen=True)
class PredictedLabel:
    """Minimal scoring view of one evaluated example."""

    example_id: str
    rough: RoughVerdict | None
    fine: FineVerdict | None = None

    @property
    def errored(self) -> bool:
        return self.rough is None


@dataclass(frozen=True)
class Confusion:
    """2x2 counts with not_OK as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class ScoreReport:
    n: int
    n_excluded: int
    accuracy_rough: float
    precision: float
    recall: float
    f1: float
    confusion: Confusion
    accuracy_fine: float | None = None
    fine_confusion: dict[str, dict[str, int]] | None = None

    def as_dict(self) -> dict[str, object]:
        return {
            "n": self.n,
            "n_excluded": self.n_excluded,
            "accuracy_rough": self.accuracy_rough,
            "accuracy_fine": self.accuracy_fine,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": self.confusion.as_dict(),
            "fine_confusion": self.fine_confusion,
        }


def _ratio(num: int, den: int, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what} has zero denominator; defining it as 0.0", MetricWarning)
        return 0.0
    return num / den


def score(
    results: Iterable[PredictedLabel],
    gold: Mapping[str, GoldLabel],
    allow_unlabeled: bool = False,
) -> ScoreReport:
    """Score predictions against gold; errored results are excluded.

    Results without a gold entry raise GoldMismatchError unless
    allow_unlabeled is set, in which case they are excluded and counted.
    Fine accuracy and the 4x4 confusion cover the subset carrying fine
    gold labels and are None when that subset is empty.
    """
    scored: list[tuple[PredictedLabel, GoldLabel]] = []
    missing: list[str] = []
    n_excluded = 0
    for result in results:
        if result.errored:
            n_excluded += 1
            continue
        label = gold.get(result.example_id)
        if label is None:
            missing.append(result.example_id)
        else:
            scored.append((result, label))
    if missing and not allow_unlabeled:
        raise GoldMismatchError("gold", missing)
    n_excluded += len(missing)
    if not scored:
        raise ValueError("no scorable results (all errored or unlabeled)")

    tp = fp = fn = tn = 0
    for result, label in scored:
        predicted_positive = result.rough is RoughVerdict.NOT_OK
        gold_positive = label.rough is RoughVerdict.NOT_OK
        if predicted_positive and gold_positive:
            tp += 1
        elif predicted_positive:
            fp += 1
        elif gold_positive:
            fn += 1
        else:
            tn += 1

    precision = _ratio(tp, tp + fp, "precision")
    recall = _ratio(tp, tp + fn, "recall")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    fine_pairs = [
        (result.fine, label.fine)
        for result, label in scored
        if label.fine is not None and result.fine is not None
    ]
    accuracy_fine = None
    fine_confusion = None
    if fine_pairs:
        accuracy_fine = sum(1 for p, g in fine_pairs if p is g) / len(fine_pairs)
        fine_confusion = {g: {p: 0 for p in _FINE_ORDER} for g in _FINE_ORDER}
        for predicted, gold_fine in fine_pairs:
            fine_confusion[gold_fine.value][predicted.value] += 1

    return ScoreReport(
        n=len(scored),
        n_excluded=n_excluded,
        accuracy_rough=sum(1 for r, g in scored if r.rough is g.rough) / len(scored),
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=Confusion(tp=tp, fp=fp, fn=fn, tn=tn),
        accuracy_fine=accuracy_fine,
        fine_confusion=fine_confusion,
    )


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_approx: float
    n: int


def _average_ranks(values: Sequence[float]) -> list[float]:
    # Tied values share the mean of the rank positions they span.
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    return cov / math.sqrt(var_x * var_y)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> SpearmanResult:
    """Rank correlation with average ranks for ties.

    The p-value comes from the t-approximation
    t = rho * sqrt((n-2) / (1-rho^2)) with n-2 degrees of freedom and is
    approximate; treat rho as the reproducible quantity.
    """
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if min(xs) == max(xs) or min(ys) == max(ys):
        raise CorrelationUndefinedError("correlation undefined for a constant vector")
    rho = _pearson(_average_ranks(xs), _average_ranks(ys))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) >= 1.0:
        p_approx = 0.0
    else:
        t_stat = rho * math.sqrt((n - 2) / (1 - rho * rho))
        p_approx = 2 * float(_student_t.sf(abs(t_stat), df=n - 2))
    return SpearmanResult(rho=rho, p_approx=p_approx, n=n)


def error_size_correlation(
    results: Iterable[PredictedLabel],
    gold: Mapping[str, GoldLabel],
    sizes: Mapping[str, int],
) -> float:
    """Rank correlation of input size with the binary prediction-error
    indicator (1 when predicted rough differs from gold)."""
    usable = [r for r in results if not r.errored]
    missing_gold = [r.example_id for r in usable if r.example_id not in gold]
    if missing_gold:
        raise GoldMismatchError("gold", missing_gold)
    missing_size = [r.example_id for r in usable if r.example_id not in sizes]
    if missing_size:
        raise GoldMismatchError("sizes", missing_size)
    xs = [float(sizes[r.example_id]) for r in usable]
    ys = [float(r.rough is not gold[r.example_id].rough) for r in usable]
    return spearman(xs, ys).rho
