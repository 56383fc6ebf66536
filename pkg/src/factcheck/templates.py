"""Per-predicate sentence templates and the universal backoff template.

A template is a pattern with `<subject>`/`<object>` placeholders. Rendering
fills the pattern with a triple's values; predicates without a usable
template fall back to the universal "The <predicate> of <subject> is
<object>." form. Templates can also be extracted from (triple, reference)
corpora by delexicalizing the reference.
"""
from __future__ import annotations

import hashlib
import io
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable

from .types import Fact, Triple

SUBJECT_SLOT = "<subject>"
OBJECT_SLOT = "<object>"

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_ACRONYM_BOUNDARY = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")
_SLOT_RE = re.compile(r"<subject>|<object>")


class RegistryParseError(ValueError):
    """Malformed registry file; carries the 1-based line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def normalize_predicate(predicate: str) -> str:
    """Canonical registry key: camelCase split, non-alphanumerics to '_', lowercase.

    Unifies the spellings used across datasets, e.g. "eatType", "eat_type"
    and "eat type" all map to "eat_type".
    """
    s = _CAMEL_BOUNDARY.sub(" ", predicate)
    s = _ACRONYM_BOUNDARY.sub(" ", s)
    s = re.sub(r"[^0-9A-Za-z]+", "_", s)
    return s.strip("_").lower()


def humanize_predicate(predicate: str) -> str:
    """Render a predicate identifier as space-separated lowercase words."""
    s = _CAMEL_BOUNDARY.sub(" ", predicate)
    s = _ACRONYM_BOUNDARY.sub(" ", s)
    s = re.sub(r"[_\-]+", " ", s)
    return re.sub(r"\s+", " ", s).strip().lower()


def ensure_terminal_period(text: str) -> str:
    """Normalize to exactly one terminal period, appending one if absent."""
    return text.strip().rstrip(".").rstrip() + "."


@dataclass(frozen=True)
class Template:
    id: str
    predicate: str  # normalized key
    pattern: str
    object_guard: str | None = None  # restricts the template to one object value

    def __post_init__(self) -> None:
        if not self.pattern.strip():
            raise ValueError("template pattern must be non-empty")
        for slot in (SUBJECT_SLOT, OBJECT_SLOT):
            if self.pattern.count(slot) > 1:
                raise ValueError(f"template pattern may contain {slot} at most once")

    @property
    def subject_free(self) -> bool:
        return SUBJECT_SLOT not in self.pattern

    def fill(self, triple: Triple) -> str:
        # Single-pass substitution: values are never rescanned for slots.
        def repl(m: re.Match[str]) -> str:
            return triple.subject if m.group(0) == SUBJECT_SLOT else triple.object

        return ensure_terminal_period(_SLOT_RE.sub(repl, self.pattern))


def render_backoff(triple: Triple, raw: bool = False) -> Fact:
    """Universal template: "The <predicate> of <subject> is <object>."

    The predicate is humanized by default ("numberOfPages" reads as
    "number of pages"); `raw` inserts the identifier verbatim.
    """
    pred_text = triple.predicate if raw else humanize_predicate(triple.predicate)
    text = ensure_terminal_period(f"The {pred_text} of {triple.subject} is {triple.object}")
    return Fact(text=text, source=triple, template_id="backoff", used_backoff=True)


def _guard_matches(guard: str, obj: str) -> bool:
    return guard.strip().casefold() == obj.strip().casefold()


def _select_index(seed: int, key: str, triple: Triple, n: int) -> int:
    payload = "\x1f".join((str(seed), key, triple.subject, triple.object))
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % n


@dataclass(frozen=True)
class TemplateRegistry:
    """Predicate-keyed template lists. Lookup never fails: missing or
    ineligible predicates fall through to the backoff template.

    Selection among multiple templates is uniform and fully determined by
    (rng_seed, predicate, triple values), so rendering is pure and safe to
    parallelize.
    """

    by_predicate: dict[str, tuple[Template, ...]] = field(default_factory=dict)
    rng_seed: int = 0

    @classmethod
    def from_entries(
        cls, entries: Iterable[tuple[str, str | None, str]], seed: int = 0
    ) -> "TemplateRegistry":
        """Build from (predicate, object_guard, pattern) rows, preserving order.

        Rows sharing a predicate key are concatenated in input order;
        template ids are assigned canonically from the key and list index.
        """
        grouped: dict[str, list[Template]] = {}
        for predicate, guard, pattern in entries:
            key = normalize_predicate(predicate)
            bucket = grouped.setdefault(key, [])
            bucket.append(
                Template(id=f"{key}:{len(bucket)}", predicate=key, pattern=pattern, object_guard=guard)
            )
        return cls({key: tuple(ts) for key, ts in grouped.items()}, rng_seed=seed)

    def templates_for(self, predicate: str) -> tuple[Template, ...]:
        return self.by_predicate.get(normalize_predicate(predicate), ())

    def __len__(self) -> int:
        return sum(len(ts) for ts in self.by_predicate.values())

    def render(self, triple: Triple, raw_backoff: bool = False) -> Fact:
        """Fill a registered template for the triple, or back off."""
        key = normalize_predicate(triple.predicate)
        templates = self.by_predicate.get(key, ())
        guarded = [t for t in templates if t.object_guard is not None and _guard_matches(t.object_guard, triple.object)]
        unguarded = [t for t in templates if t.object_guard is None]
        eligible = guarded or unguarded
        if not eligible:
            return render_backoff(triple, raw=raw_backoff)
        chosen = eligible[_select_index(self.rng_seed, key, triple, len(eligible))]
        return Fact(text=chosen.fill(triple), source=triple, template_id=chosen.id, used_backoff=False)


@dataclass
class ExtractionStats:
    kept: int = 0
    discarded_unmatched: int = 0  # subject or object surface form not found
    discarded_subject_free: int = 0  # reference pronominalizes the subject

    @property
    def discarded(self) -> int:
        return self.discarded_unmatched + self.discarded_subject_free


def _first_span(
    text: str, needle: str, blocked: tuple[tuple[int, int], ...]
) -> tuple[int, int] | None:
    for m in re.finditer(re.escape(needle), text, re.IGNORECASE):
        span = m.span()
        if all(span[1] <= b_start or span[0] >= b_end for b_start, b_end in blocked):
            return span
    return None


def delexicalize(reference: str, triple: Triple) -> tuple[str | None, bool]:
    """Replace the triple's surface forms in a reference with placeholders.

    Matching is case-insensitive, first occurrence only, longest value
    first so a value nested inside the other is not clobbered. Returns
    (pattern, subject_found); pattern is None when the object (or both
    values) cannot be located.
    """
    ref = reference.strip()
    slots = [(triple.subject, SUBJECT_SLOT), (triple.object, OBJECT_SLOT)]
    slots.sort(key=lambda pair: len(pair[0]), reverse=True)  # stable: subject first on ties

    spans: list[tuple[tuple[int, int], str]] = []
    found = {SUBJECT_SLOT: False, OBJECT_SLOT: False}
    for value, slot in slots:
        span = _first_span(ref, value, tuple(s for s, _ in spans))
        if span is not None:
            spans.append((span, slot))
            found[slot] = True

    if not found[OBJECT_SLOT]:
        return None, found[SUBJECT_SLOT]

    pattern = []
    cursor = 0
    for (start, end), slot in sorted(spans):
        pattern.append(ref[cursor:start])
        pattern.append(slot)
        cursor = end
    pattern.append(ref[cursor:])
    return "".join(pattern), found[SUBJECT_SLOT]


def extract_templates(
    corpus: Iterable[tuple[Triple, str]],
    seed: int = 0,
    keep_subject_free: bool = False,
) -> tuple[TemplateRegistry, ExtractionStats]:
    """Delexicalize single-triple references into a template registry.

    Items whose object surface form is absent from the reference are
    discarded; so are patterns left without a subject placeholder, unless
    `keep_subject_free` retains them.
    """
    stats = ExtractionStats()
    entries: list[tuple[str, str | None, str]] = []
    for triple, reference in corpus:
        pattern, subject_found = delexicalize(reference, triple)
        if pattern is None:
            stats.discarded_unmatched += 1
            continue
        if not subject_found and not keep_subject_free:
            stats.discarded_subject_free += 1
            continue
        entries.append((triple.predicate, None, pattern))
        stats.kept += 1
    return TemplateRegistry.from_entries(entries, seed=seed), stats


_SEED_DIRECTIVE = re.compile(r"#\s*seed\s*=\s*(-?\d+)\s*$")


def load_registry(source: IO[str] | str, seed: int | None = None) -> TemplateRegistry:
    """Read a registry file: `predicate<TAB>[object_guard<TAB>]pattern` lines.

    Comment lines start with '#'; a `# seed=N` comment restores the
    selection seed unless `seed` overrides it.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8") as handle:
            return load_registry(handle, seed=seed)

    entries: list[tuple[str, str | None, str]] = []
    file_seed: int | None = None
    for lineno, raw in enumerate(source, 1):
        line = raw.rstrip("\n")
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            m = _SEED_DIRECTIVE.match(stripped)
            if m:
                file_seed = int(m.group(1))
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            predicate, guard, pattern = parts[0], None, parts[1]
        elif len(parts) == 3:
            predicate, guard, pattern = parts
        else:
            raise RegistryParseError(lineno, f"expected 2 or 3 tab-separated fields, got {len(parts)}")
        if not predicate.strip():
            raise RegistryParseError(lineno, "empty predicate")
        try:
            Template(id="probe", predicate=predicate, pattern=pattern, object_guard=guard)
        except ValueError as exc:
            raise RegistryParseError(lineno, str(exc)) from exc
        entries.append((predicate, guard, pattern))

    effective_seed = seed if seed is not None else (file_seed if file_seed is not None else 0)
    return TemplateRegistry.from_entries(entries, seed=effective_seed)


def save_registry(registry: TemplateRegistry, path: str) -> None:
    """Write the registry in the line format read by `load_registry`."""
    lines = [f"# seed={registry.rng_seed}"]
    for key, templates in registry.by_predicate.items():
        for template in templates:
            fields = [key, template.pattern] if template.object_guard is None else [
                key,
                template.object_guard,
                template.pattern,
            ]
            for value in fields:
                if "\t" in value or "\n" in value:
                    raise ValueError(f"registry field not representable in TSV: {value!r}")
            lines.append("\t".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def default_e2e_registry(seed: int = 0) -> TemplateRegistry:
    """The 8 built-in restaurant-domain templates (one per attribute, with a
    yes/no pair for family_friendly). Reconstructed surface forms; see README."""
    text = resources.files("factcheck").joinpath("data/e2e_templates.tsv").read_text("utf-8")
    return load_registry(io.StringIO(text), seed=seed)


def empty_registry(seed: int = 0) -> TemplateRegistry:
    """Registry with no templates: every render uses the backoff form."""
    return TemplateRegistry({}, rng_seed=seed)
