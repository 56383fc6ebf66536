"""NLI classifier backends.

Everything downstream talks to a backend through `classify(pairs)`, so the
evaluator is testable with a deterministic fixture and deployable against
the HTTP inference sidecar without code changes. Classification is pure
(same pair, same distribution), which is what makes retries and the
response cache safe.
"""
from __future__ import annotations

import json
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import requests

from .types import CheckDirection, CheckResult, NliDistribution

Pair = tuple[str, str]


@dataclass(frozen=True)
class NliRequest:
    """An ordered batch of (premise, hypothesis) pairs."""

    pairs: tuple[Pair, ...]

    def __post_init__(self) -> None:
        if not self.pairs:
            raise ValueError("request needs at least one pair")
        for i, (premise, hypothesis) in enumerate(self.pairs):
            if not premise.strip():
                raise ValueError(f"pair {i}: empty premise")
            if not hypothesis.strip():
                raise ValueError(f"pair {i}: empty hypothesis")


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str
    batch_size: int = 16
    timeout: float = 30.0
    retries: int = 2
    cache_enabled: bool = True
    max_inflight: int = 4
    retry_base_delay: float = 0.5

    def __post_init__(self) -> None:
        if not self.endpoint_url.strip():
            raise ValueError("endpoint_url must be non-empty")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")
        if self.retry_base_delay < 0:
            raise ValueError("retry_base_delay must be >= 0")


class BackendError(RuntimeError):
    """Base class for classification failures."""


class BackendUnavailableError(BackendError):
    """Transport failure that survived all retries."""

    def __init__(self, message: str, pair_index: int | None = None):
        if pair_index is not None:
            message = f"{message} (first affected pair index {pair_index})"
        super().__init__(message)
        self.pair_index = pair_index


class FixtureMissError(BackendError):
    """Fixture table has no entry for a pair and no default was given."""

    def __init__(self, pair: Pair):
        premise, hypothesis = pair
        super().__init__(
            f"fixture has no distribution for premise={premise!r} hypothesis={hypothesis!r}"
        )
        self.pair = pair


class ProtocolError(BackendError):
    """The server answered, but not in the agreed wire format."""


class NliBackend(Protocol):
    def classify(self, pairs: Sequence[Pair]) -> list[NliDistribution]:
        """One distribution per pair, same order."""
        ...

    def stats(self) -> dict[str, int]:
        """Monotonic counters; callers diff snapshots to attribute work."""
        ...


class FixtureBackend:
    """Deterministic table lookup. Misses use `default` if given, else fail."""

    def __init__(
        self,
        table: Mapping[Pair, NliDistribution],
        default: NliDistribution | None = None,
    ):
        self._table = dict(table)
        self._default = default
        self._lock = threading.Lock()
        self._calls = 0
        self._pairs = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureBackend":
        """Load `{"pairs": [{premise, hypothesis, contradiction, neutral,
        entailment}, ...], "default": {contradiction, neutral, entailment}?}`."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict) or not isinstance(raw.get("pairs"), list):
            raise ValueError(f"{path}: fixture file must be an object with a 'pairs' array")
        table: dict[Pair, NliDistribution] = {}
        for i, entry in enumerate(raw["pairs"]):
            try:
                table[(entry["premise"], entry["hypothesis"])] = _distribution_from(entry)
            except (TypeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}: pairs[{i}]: {exc}") from exc
        default = None
        if raw.get("default") is not None:
            try:
                default = _distribution_from(raw["default"])
            except (TypeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}: default: {exc}") from exc
        return cls(table, default)

    def classify(self, pairs: Sequence[Pair]) -> list[NliDistribution]:
        with self._lock:
            self._calls += 1
            self._pairs += len(pairs)
        out = []
        for pair in pairs:
            dist = self._table.get(pair)
            if dist is None:
                if self._default is None:
                    raise FixtureMissError(pair)
                dist = self._default
            out.append(dist)
        return out

    def stats(self) -> dict[str, int]:
        with self._lock:
            return {"calls": self._calls, "pairs": self._pairs}


def _distribution_from(entry: Mapping[str, object]) -> NliDistribution:
    return NliDistribution(
        p_contradiction=float(entry["contradiction"]),
        p_neutral=float(entry["neutral"]),
        p_entailment=float(entry["entailment"]),
    )


class HttpBackend:
    """Client for the `/nli` wire protocol.

    Requests are chunked to `batch_size` pairs and posted with at most
    `max_inflight` in flight; each chunk is retried with exponential
    backoff because classification is idempotent.
    """

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self._config = config
        self._session = session or requests.Session()
        self._inflight = threading.BoundedSemaphore(config.max_inflight)
        self._lock = threading.Lock()
        self._requests = 0
        self._pairs = 0

    @property
    def endpoint_url(self) -> str:
        return self._config.endpoint_url

    def classify(self, pairs: Sequence[Pair]) -> list[NliDistribution]:
        size = self._config.batch_size
        chunks = [(start, tuple(pairs[start : start + size])) for start in range(0, len(pairs), size)]
        if len(chunks) <= 1:
            return [dist for start, chunk in chunks for dist in self._classify_chunk(chunk, start)]
        with ThreadPoolExecutor(max_workers=min(self._config.max_inflight, len(chunks))) as pool:
            futures = [pool.submit(self._classify_chunk, chunk, start) for start, chunk in chunks]
            return [dist for future in futures for dist in future.result()]

    def health(self) -> dict[str, object]:
        """GET /health; raises BackendUnavailableError unless status is ok."""
        url = self._config.endpoint_url.rstrip("/") + "/health"
        try:
            response = self._session.get(url, timeout=self._config.timeout)
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"health check failed: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailableError(
                f"health check returned HTTP {response.status_code}: {_error_text(response)}"
            )
        payload = response.json()
        if not isinstance(payload, dict) or payload.get("status") != "ok":
            raise BackendUnavailableError(f"service not ready: {payload!r}")
        return payload

    def stats(self) -> dict[str, int]:
        with self._lock:
            return {"calls": self._requests, "pairs": self._pairs}

    def _classify_chunk(self, chunk: tuple[Pair, ...], offset: int) -> list[NliDistribution]:
        url = self._config.endpoint_url.rstrip("/") + "/nli"
        body = {"pairs": [{"premise": p, "hypothesis": h} for p, h in chunk]}
        last_failure = None
        with self._inflight:
            for attempt in range(self._config.retries + 1):
                if attempt:
                    time.sleep(self._config.retry_base_delay * 2 ** (attempt - 1))
                with self._lock:
                    self._requests += 1
                try:
                    response = self._session.post(url, json=body, timeout=self._config.timeout)
                except requests.RequestException as exc:
                    last_failure = str(exc)
                    continue
                if response.status_code == 200:
                    results = self._parse_results(response, chunk, offset)
                    with self._lock:
                        self._pairs += len(chunk)
                    return results
                if response.status_code == 503:
                    # Model still loading; worth retrying.
                    last_failure = f"HTTP 503: {_error_text(response)}"
                    continue
                raise ProtocolError(
                    f"HTTP {response.status_code} from {url}: {_error_text(response)}"
                )
        raise BackendUnavailableError(
            f"{url} unreachable after {self._config.retries + 1} attempts: {last_failure}",
            pair_index=offset,
        )

    def _parse_results(
        self, response: requests.Response, chunk: tuple[Pair, ...], offset: int
    ) -> list[NliDistribution]:
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolError(f"response is not JSON: {exc}") from exc
        results = payload.get("results") if isinstance(payload, dict) else None
        if not isinstance(results, list) or len(results) != len(chunk):
            got = len(results) if isinstance(results, list) else "none"
            raise ProtocolError(f"expected {len(chunk)} results, got {got}")
        out = []
        for i, entry in enumerate(results):
            try:
                out.append(_distribution_from(entry))
            except (TypeError, KeyError, ValueError) as exc:
                raise ProtocolError(f"result for pair {offset + i} malformed: {exc}") from exc
        return out


def _error_text(response: requests.Response) -> str:
    try:
        payload = response.json()
        if isinstance(payload, dict) and isinstance(payload.get("error"), str):
            return payload["error"]
    except ValueError:
        pass
    return response.text[:200]


class CachingBackend:
    """Per-process memo of inner results keyed by the exact pair strings.

    A pair's slot is a Future so that concurrent requests for the same
    pair wait on one inner call instead of duplicating it. Failed inner
    calls evict their slots so later attempts can retry.
    """

    def __init__(self, inner: NliBackend):
        self._inner = inner
        self._lock = threading.Lock()
        self._slots: dict[Pair, Future[NliDistribution]] = {}
        self._hits = 0
        self._misses = 0

    def classify(self, pairs: Sequence[Pair]) -> list[NliDistribution]:
        owned: list[tuple[Pair, Future[NliDistribution]]] = []
        slots: list[Future[NliDistribution]] = []
        with self._lock:
            for pair in pairs:
                slot = self._slots.get(pair)
                if slot is None:
                    slot = Future()
                    self._slots[pair] = slot
                    owned.append((pair, slot))
                    self._misses += 1
                else:
                    self._hits += 1
                slots.append(slot)
        if owned:
            try:
                dists = self._inner.classify([p for p, _ in owned])
                if len(dists) != len(owned):
                    raise ProtocolError(
                        f"backend returned {len(dists)} results for {len(owned)} pairs"
                    )
            except BaseException as exc:
                with self._lock:
                    for pair, _ in owned:
                        self._slots.pop(pair, None)
                for _, slot in owned:
                    slot.set_exception(exc)
                raise
            for (_, slot), dist in zip(owned, dists):
                slot.set_result(dist)
        return [slot.result() for slot in slots]

    def stats(self) -> dict[str, int]:
        merged = dict(self._inner.stats())
        with self._lock:
            merged["cache_hits"] = self._hits
            merged["cache_misses"] = self._misses
        return merged


def classify_batch(req: NliRequest, backend: NliBackend) -> list[NliDistribution]:
    results = backend.classify(req.pairs)
    if len(results) != len(req.pairs):
        raise ProtocolError(f"backend returned {len(results)} results for {len(req.pairs)} pairs")
    return results


def check(
    premise: str, hypothesis: str, backend: NliBackend, direction: CheckDirection
) -> CheckResult:
    """Run one NLI check; `passed` follows the strict-argmax rule."""
    dist = classify_batch(NliRequest(pairs=((premise, hypothesis),)), backend)[0]
    return CheckResult(
        direction=direction, premise=premise, hypothesis=hypothesis, distribution=dist
    )
