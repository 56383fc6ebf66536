"""Parsers for the supported on-disk input formats.

The canonical interchange format is JSONL (one example per line); the
pipe-triple, restaurant-MR and ratings-CSV parsers exist to convert
dataset-specific layouts into it.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import IO, Iterable

from .templates import normalize_predicate
from .types import Example, FineVerdict, GoldLabel, RoughVerdict, Triple, rough_from_fine


class InputParseError(ValueError):
    """Malformed input; message names the offending line/row and field."""


_FINE_BY_NAME = {v.value: v for v in FineVerdict}
_ROUGH_BY_NAME = {v.value: v for v in RoughVerdict}


def _parse_gold(raw: object, line: int) -> GoldLabel:
    if not isinstance(raw, dict):
        raise InputParseError(f"line {line}: field 'gold' must be an object")
    fine = None
    rough = None
    if "fine" in raw:
        fine = _FINE_BY_NAME.get(raw["fine"])
        if fine is None:
            raise InputParseError(
                f"line {line}: field 'gold.fine' has unknown label {raw['fine']!r} "
                f"(expected one of {sorted(_FINE_BY_NAME)})"
            )
    if "rough" in raw:
        rough = _ROUGH_BY_NAME.get(raw["rough"])
        if rough is None:
            raise InputParseError(
                f"line {line}: field 'gold.rough' has unknown label {raw['rough']!r}"
            )
    if fine is None and rough is None:
        raise InputParseError(f"line {line}: field 'gold' needs 'fine' or 'rough'")
    if rough is None:
        rough = rough_from_fine(fine)
    try:
        return GoldLabel(rough=rough, fine=fine)
    except ValueError as exc:
        raise InputParseError(f"line {line}: field 'gold': {exc}") from exc


def parse_jsonl(lines: Iterable[str]) -> list[Example]:
    """Parse canonical JSONL: one example object per line.

    Required fields: id, triples (array of [subject, predicate, object]),
    text. Optional: gold ({fine and/or rough}), human_score. Blank lines
    are skipped; file order is preserved.
    """
    examples: list[Example] = []
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InputParseError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise InputParseError(f"line {lineno}: expected a JSON object")
        for name in ("id", "triples", "text"):
            if name not in obj:
                raise InputParseError(f"line {lineno}: missing field {name!r}")
        if not isinstance(obj["triples"], list) or not obj["triples"]:
            raise InputParseError(f"line {lineno}: field 'triples' must be a non-empty array")
        triples = []
        for i, item in enumerate(obj["triples"]):
            if not isinstance(item, list) or len(item) != 3:
                raise InputParseError(
                    f"line {lineno}: field 'triples[{i}]' must be [subject, predicate, object]"
                )
            try:
                triples.append(Triple(*item))
            except ValueError as exc:
                raise InputParseError(f"line {lineno}: field 'triples[{i}]': {exc}") from exc
        gold = _parse_gold(obj["gold"], lineno) if obj.get("gold") is not None else None
        human_score = obj.get("human_score")
        if human_score is not None and not isinstance(human_score, (int, float)):
            raise InputParseError(f"line {lineno}: field 'human_score' must be a number")
        try:
            examples.append(
                Example(
                    id=str(obj["id"]),
                    triples=tuple(triples),
                    text=obj["text"],
                    gold=gold,
                    human_score=float(human_score) if human_score is not None else None,
                )
            )
        except (TypeError, ValueError) as exc:
            raise InputParseError(f"line {lineno}: {exc}") from exc
    return examples


def parse_pipe_triples(block: str) -> list[Triple]:
    """Parse `subject | predicate | object` lines; blank lines are skipped."""
    triples = []
    for lineno, line in enumerate(block.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise InputParseError(
                f"line {lineno}: expected 3 pipe-separated fields, got {len(parts)}"
            )
        try:
            triples.append(Triple(*(p.strip() for p in parts)))
        except ValueError as exc:
            raise InputParseError(f"line {lineno}: {exc}") from exc
    return triples


def parse_e2e_mr(mr: str) -> list[Triple]:
    """Convert a restaurant MR (`attr1[val1], attr2[val2], ...`) to triples.

    The value of the single `name[...]` pair becomes the subject of every
    triple and emits no triple itself; attribute names are normalized the
    same way as registry keys (eatType -> eat_type).
    """
    pairs: list[tuple[str, str]] = []
    pos = 0
    n = len(mr)
    while pos < n:
        lb = mr.find("[", pos)
        attr = mr[pos : lb if lb >= 0 else n].strip(" ,\t")
        if lb < 0:
            if attr:
                raise InputParseError(f"pair {attr!r}: missing '[value]'")
            break
        if "]" in attr:
            raise InputParseError(f"pair {attr!r}: unbalanced brackets")
        rb = mr.find("]", lb + 1)
        if rb < 0 or "[" in mr[lb + 1 : rb]:
            raise InputParseError(f"pair {attr!r}: unbalanced brackets")
        if not attr:
            raise InputParseError(f"pair {mr[pos : rb + 1].strip()!r}: empty attribute name")
        value = mr[lb + 1 : rb].strip()
        if not value:
            raise InputParseError(f"pair {attr!r}: empty value")
        pairs.append((attr, value))
        pos = rb + 1

    names = [v for a, v in pairs if normalize_predicate(a) == "name"]
    if not names:
        raise InputParseError("missing name[...] pair")
    if len(names) > 1:
        raise InputParseError("multiple name[...] pairs")
    subject = names[0]
    return [
        Triple(subject, normalize_predicate(attr), value)
        for attr, value in pairs
        if normalize_predicate(attr) != "name"
    ]


@dataclass(frozen=True)
class RatingsConfig:
    """Column names and the OK threshold for Likert-rating CSVs."""

    score_column: str = "score"
    id_column: str = "id"
    text_column: str = "text"
    threshold: float = 2.5

    def __post_init__(self) -> None:
        if not 1.0 <= self.threshold <= 3.0:
            raise ValueError(f"threshold {self.threshold!r} outside the 1-3 Likert range")


def load_ratings(
    stream: IO[str] | Iterable[str], cfg: RatingsConfig
) -> dict[str, tuple[float, GoldLabel]]:
    """Read averaged human ratings; score >= threshold counts as OK.

    Returns id -> (score, gold label); scores are kept for correlation
    analysis. Set cfg.text_column to "" if the CSV has no text column.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise InputParseError("ratings CSV is empty")
    for column in (cfg.id_column, cfg.score_column, cfg.text_column):
        if column and column not in reader.fieldnames:
            raise InputParseError(f"ratings CSV missing column {column!r}")
    ratings: dict[str, tuple[float, GoldLabel]] = {}
    for row in reader:
        rownum = reader.line_num
        example_id = (row[cfg.id_column] or "").strip()
        if not example_id:
            raise InputParseError(f"row {rownum}: empty id")
        if example_id in ratings:
            raise InputParseError(f"row {rownum}: duplicate id {example_id!r}")
        raw_score = row[cfg.score_column]
        try:
            score = float(raw_score)
        except (TypeError, ValueError) as exc:
            raise InputParseError(f"row {rownum}: cannot parse score {raw_score!r}") from exc
        rough = RoughVerdict.OK if score >= cfg.threshold else RoughVerdict.NOT_OK
        ratings[example_id] = (score, GoldLabel(rough=rough))
    return ratings
