"""Checkpoint loading and batched three-way NLI inference."""
from __future__ import annotations

import threading
from typing import Mapping, Sequence

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer
from transformers.utils import logging as hf_logging

from .config import ServiceConfig

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

PROTOCOL_LABELS = ("contradiction", "neutral", "entailment")


class ModelLoadError(RuntimeError):
    """Checkpoint unusable: missing, mislabeled head, or failed sanity check."""


def _label_map(id2label: Mapping[object, object]) -> dict[int, str]:
    """Map logit index -> protocol field name from the checkpoint config.

    The head order is never assumed: the checkpoint must name all three
    labels itself, or loading fails rather than guessing positionally.
    """
    mapping = {int(index): str(label).strip().lower() for index, label in id2label.items()}
    if sorted(mapping.values()) != sorted(PROTOCOL_LABELS):
        raise ModelLoadError(
            f"checkpoint labels {dict(id2label)!r} do not name "
            "contradiction/neutral/entailment; refusing to guess an order"
        )
    return mapping


class NliModel:
    """One loaded checkpoint plus its tokenizer and label-order map.

    The HTTP layer may run requests concurrently, but inference happens
    under a lock: one batch at a time on the device.
    """

    def __init__(self, config: ServiceConfig) -> None:
        self._config = config
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(config.model_id)
            model = AutoModelForSequenceClassification.from_pretrained(config.model_id)
        except ModelLoadError:
            raise
        except Exception as exc:  # hub and file errors come in many shapes
            raise ModelLoadError(
                f"cannot load checkpoint {config.model_id!r}: {exc}"
            ) from exc
        self._field_by_index = _label_map(model.config.id2label)
        self._model = model.to(config.device)
        self._model.eval()
        self._lock = threading.Lock()
        if config.sanity_check:
            self._run_sanity_check()

    @property
    def model_id(self) -> str:
        return self._config.model_id

    def classify(self, pairs: Sequence[tuple[str, str]]) -> list[dict[str, object]]:
        """Score (premise, hypothesis) pairs in request order.

        Each result maps the three protocol labels to probabilities that
        sum to one, plus a "truncated" flag when the pair exceeded
        max_sequence_tokens and lost premise (or, at the limit,
        hypothesis) tokens.
        """
        results: list[dict[str, object]] = []
        for start in range(0, len(pairs), self._config.max_batch):
            results.extend(self._classify_batch(pairs[start : start + self._config.max_batch]))
        return results

    def _classify_batch(self, pairs: Sequence[tuple[str, str]]) -> list[dict[str, object]]:
        encoded = []
        truncated = []
        for premise, hypothesis in pairs:
            encoding, was_truncated = self._encode_one(premise, hypothesis)
            encoded.append(encoding)
            truncated.append(was_truncated)
        batch = self._tokenizer.pad(encoded, return_tensors="pt").to(self._config.device)
        with self._lock, torch.no_grad():
            logits = self._model(**batch).logits
        probabilities = torch.softmax(logits.float(), dim=-1).tolist()
        out = []
        for row, was_truncated in zip(probabilities, truncated):
            result: dict[str, object] = {
                field: row[index] for index, field in self._field_by_index.items()
            }
            result["truncated"] = was_truncated
            out.append(result)
        return out

    def _encode_one(self, premise: str, hypothesis: str):
        """Encode a pair, truncating from the premise end when too long.

        The hypothesis is the claim under test, so it is kept whole
        whenever it fits; only when the hypothesis alone overflows the
        window do both sides shrink.
        """
        max_length = self._config.max_sequence_tokens
        specials = self._tokenizer.num_special_tokens_to_add(pair=True)
        hypothesis_length = len(
            self._tokenizer(hypothesis, add_special_tokens=False)["input_ids"]
        )
        strategy = "only_first" if hypothesis_length + specials < max_length else "longest_first"
        encoding = self._tokenizer(
            premise, hypothesis, truncation=strategy, max_length=max_length
        )
        full_length = len(self._tokenizer(premise, hypothesis)["input_ids"])
        return encoding, full_length > max_length

    def _run_sanity_check(self) -> None:
        pair = (self._config.sanity_premise, self._config.sanity_hypothesis)
        result = self.classify([pair])[0]
        probabilities = {name: result[name] for name in PROTOCOL_LABELS}
        top = max(probabilities, key=probabilities.get)
        if top != "entailment":
            raise ModelLoadError(
                "label-order sanity check failed: expected the sanity pair to be "
                f"classified entailment, got {top!r} ({probabilities})"
            )
