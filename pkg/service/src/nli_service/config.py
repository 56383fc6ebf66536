"""Service configuration from keyword arguments, the environment, or a JSON file."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from typing import Mapping

ENV_PREFIX = "NLI_SERVICE_"

# Classified once at startup to verify the index-to-name label mapping end
# to end. Any MNLI-style checkpoint must call this pair entailment; a
# permuted head would answer something else and abort the load.
DEFAULT_SANITY_PREMISE = "A small brown dog is running through the green park."
DEFAULT_SANITY_HYPOTHESIS = "A dog is running."


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the sidecar needs to load one checkpoint and serve it."""

    model_id: str = "roberta-large-mnli"
    host: str = "127.0.0.1"
    port: int = 8100
    max_batch: int = 16
    max_sequence_tokens: int = 512
    device: str = "cpu"
    sanity_check: bool = True
    sanity_premise: str = DEFAULT_SANITY_PREMISE
    sanity_hypothesis: str = DEFAULT_SANITY_HYPOTHESIS

    def __post_init__(self) -> None:
        if not self.model_id.strip():
            raise ValueError("model_id must be non-empty")
        if not 0 < self.port < 65536:
            raise ValueError(f"port must be in 1..65535, got {self.port}")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.max_sequence_tokens < 16:
            raise ValueError(
                f"max_sequence_tokens must be >= 16, got {self.max_sequence_tokens}"
            )
        if self.sanity_check:
            if not self.sanity_premise.strip() or not self.sanity_hypothesis.strip():
                raise ValueError("sanity pair must be non-empty when sanity_check is on")


_INT_FIELDS = {"port", "max_batch", "max_sequence_tokens"}
_BOOL_FIELDS = {"sanity_check"}
_BOOL_WORDS = {
    "1": True, "true": True, "yes": True, "on": True,
    "0": False, "false": False, "no": False, "off": False,
}


def _coerce(name: str, raw: object) -> object:
    if name in _INT_FIELDS:
        if isinstance(raw, bool) or not isinstance(raw, (int, str)):
            raise ValueError(f"{name}: expected an integer, got {raw!r}")
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{name}: cannot parse integer from {raw!r}") from None
    if name in _BOOL_FIELDS:
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.strip().lower() in _BOOL_WORDS:
            return _BOOL_WORDS[raw.strip().lower()]
        raise ValueError(f"{name}: cannot parse boolean from {raw!r}")
    if not isinstance(raw, str):
        raise ValueError(f"{name}: expected a string, got {raw!r}")
    return raw


def _kwargs_from_env(environ: Mapping[str, str]) -> dict[str, object]:
    out: dict[str, object] = {}
    for field in fields(ServiceConfig):
        raw = environ.get(ENV_PREFIX + field.name.upper())
        if raw is not None:
            out[field.name] = _coerce(field.name, raw)
    return out


def _kwargs_from_file(path: str) -> dict[str, object]:
    with open(path, encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    allowed = {field.name for field in fields(ServiceConfig)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ValueError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return {name: _coerce(name, value) for name, value in raw.items()}


def config_from_env(environ: Mapping[str, str] | None = None) -> ServiceConfig:
    """Build a config from NLI_SERVICE_* environment variables."""
    env = os.environ if environ is None else environ
    return ServiceConfig(**_kwargs_from_env(env))


def config_from_file(path: str) -> ServiceConfig:
    return ServiceConfig(**_kwargs_from_file(path))


def load_config(
    path: str | None = None, environ: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Merge sources: defaults < config file < environment variables."""
    env = os.environ if environ is None else environ
    kwargs: dict[str, object] = {}
    if path is not None:
        kwargs.update(_kwargs_from_file(path))
    kwargs.update(_kwargs_from_env(env))
    return ServiceConfig(**kwargs)
