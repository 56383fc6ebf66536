"""Command-line interface.

Subcommands: evaluate, score, extract-templates, convert-e2e,
convert-triples. Exit codes: 0 success, 1 backend/evaluation failure,
2 configuration or input parse errors. Diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .backend import (
    BackendConfig,
    BackendError,
    BackendUnavailableError,
    CachingBackend,
    FixtureBackend,
    HttpBackend,
    NliBackend,
)
from .evaluator import CheckMode, evaluate_corpus
from .ingestion import InputParseError, RatingsConfig, load_ratings, parse_e2e_mr, parse_jsonl, parse_pipe_triples
from .metrics import (
    CorrelationUndefinedError,
    GoldMismatchError,
    SpearmanResult,
    error_size_correlation,
    score,
    spearman,
)
from .reporting import (
    atomic_write_text,
    format_score_table,
    read_results_jsonl,
    score_report_to_dict,
    write_examples_jsonl,
    write_results_jsonl,
    write_run_stats,
)
from .templates import (
    RegistryParseError,
    default_e2e_registry,
    empty_registry,
    extract_templates,
    load_registry,
    save_registry,
)
from .types import Example, GoldLabel

ENDPOINT_ENV = "FACTCHECK_ENDPOINT"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class CliError(Exception):
    """Fatal CLI problem; carries the process exit code."""

    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _fail(message: str, code: int = EXIT_CONFIG) -> CliError:
    return CliError(message, code)


def _read_lines(path: str) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.readlines()
    except OSError as exc:
        raise _fail(f"cannot read {path}: {exc}") from exc


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _fail(f"cannot read {path}: {exc}") from exc


def _load_registry(args: argparse.Namespace):
    seed = args.seed if args.seed is not None else 0
    if args.backoff_only:
        return empty_registry(seed=seed)
    if args.templates is None:
        return empty_registry(seed=seed)
    if args.templates == "e2e":
        return default_e2e_registry(seed=seed)
    try:
        return load_registry(args.templates, seed=args.seed)
    except OSError as exc:
        raise _fail(f"cannot read {args.templates}: {exc}") from exc
    except RegistryParseError as exc:
        raise _fail(f"{args.templates}: {exc}") from exc


def _build_backend(args: argparse.Namespace) -> NliBackend:
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if args.fixture and args.endpoint:
        raise _fail("--fixture and --endpoint are mutually exclusive")
    if args.fixture:
        try:
            backend: NliBackend = FixtureBackend.from_file(args.fixture)
        except (OSError, ValueError) as exc:
            raise _fail(f"cannot load fixture: {exc}") from exc
    elif endpoint:
        config = BackendConfig(
            endpoint_url=endpoint,
            batch_size=args.batch_size,
            timeout=args.timeout,
            retries=args.retries,
            cache_enabled=not args.no_cache,
        )
        http = HttpBackend(config)
        try:
            http.health()
        except BackendUnavailableError as exc:
            raise _fail(str(exc), EXIT_RUNTIME) from exc
        backend = http
    else:
        raise _fail(f"no backend: pass --fixture, --endpoint, or set {ENDPOINT_ENV}")
    if args.no_cache:
        return backend
    return CachingBackend(backend)


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.parallelism < 1:
        raise _fail("--parallelism must be >= 1")
    examples = parse_jsonl(_read_lines(args.input))
    registry = _load_registry(args)
    backend = _build_backend(args)
    try:
        results, stats = evaluate_corpus(
            examples,
            registry,
            backend,
            mode=CheckMode(args.mode),
            parallelism=args.parallelism,
            raw_backoff=args.raw_backoff,
            fail_fast=args.fail_fast,
        )
    except (BackendError, ValueError) as exc:
        raise _fail(f"evaluation aborted: {exc}", EXIT_RUNTIME) from exc
    write_results_jsonl(results, args.out)
    write_run_stats(stats, str(args.out) + ".stats.json")
    print(
        f"evaluated {stats.examples} examples "
        f"(errors: {stats.errors}, checks: {stats.checks}, "
        f"cache hits: {stats.cache_hits}) -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def _gold_from_corpus(path: str) -> tuple[dict[str, GoldLabel], dict[str, float]]:
    examples = parse_jsonl(_read_lines(path))
    gold: dict[str, GoldLabel] = {}
    human: dict[str, float] = {}
    for ex in examples:
        if ex.gold is not None:
            gold[ex.id] = ex.gold
        if ex.human_score is not None:
            human[ex.id] = ex.human_score
    return gold, human


def _gold_from_ratings(args: argparse.Namespace) -> tuple[dict[str, GoldLabel], dict[str, float]]:
    cfg = RatingsConfig(
        score_column=args.ratings_score_column,
        id_column=args.ratings_id_column,
        text_column=args.ratings_text_column,
        threshold=args.threshold,
    )
    with open(args.ratings, encoding="utf-8", newline="") as fh:
        ratings = load_ratings(fh, cfg)
    return {k: label for k, (_, label) in ratings.items()}, {
        k: score_ for k, (score_, _) in ratings.items()
    }


def cmd_score(args: argparse.Namespace) -> int:
    records = read_results_jsonl(_read_lines(args.results))
    if args.gold:
        gold, human = _gold_from_corpus(args.gold)
    else:
        try:
            gold, human = _gold_from_ratings(args)
        except OSError as exc:
            raise _fail(f"cannot read {args.ratings}: {exc}") from exc

    predictions = [r.to_predicted() for r in records]
    try:
        report = score(predictions, gold, allow_unlabeled=args.allow_unlabeled)
    except GoldMismatchError as exc:
        raise _fail(str(exc)) from exc
    except ValueError as exc:
        raise _fail(str(exc)) from exc

    scorable = [r for r in records if r.error is None and r.example_id in gold]
    confidence_rho: float | None = None
    confidence_p: float | None = None
    rho_cell: float | str | None = None
    with_scores = [r for r in scorable if r.example_id in human and r.confidence is not None]
    if with_scores:
        try:
            result: SpearmanResult = spearman(
                [r.confidence for r in with_scores],
                [human[r.example_id] for r in with_scores],
            )
            confidence_rho, confidence_p = result.rho, result.p_approx
            rho_cell = result.rho
        except (CorrelationUndefinedError, ValueError):
            rho_cell = "n/a"

    error_rho: float | None = None
    error_cell: float | str | None = None
    if scorable:
        sizes = {r.example_id: r.n_facts for r in scorable}
        try:
            error_rho = error_size_correlation(
                [r.to_predicted() for r in scorable], gold, sizes
            )
            error_cell = error_rho
        except (CorrelationUndefinedError, ValueError):
            error_cell = "n/a"

    sys.stdout.write(format_score_table(report, rho_cell, error_cell))
    if args.out:
        payload = score_report_to_dict(report, confidence_rho, confidence_p, error_rho)
        atomic_write_text(args.out, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
    return EXIT_OK


def cmd_extract_templates(args: argparse.Namespace) -> int:
    examples = parse_jsonl(_read_lines(args.input))
    pairs = []
    for index, ex in enumerate(examples, 1):
        if len(ex.triples) != 1:
            raise _fail(
                f"example #{index} (id={ex.id!r}) has {len(ex.triples)} triples; "
                "template extraction needs single-triple references"
            )
        pairs.append((ex.triples[0], ex.text))
    registry, stats = extract_templates(
        pairs, seed=args.seed if args.seed is not None else 0,
        keep_subject_free=args.keep_subject_free,
    )
    save_registry(registry, args.out)
    print(
        f"kept {stats.kept} templates across {len(registry.by_predicate)} predicates; "
        f"discarded {stats.discarded} "
        f"(object unmatched: {stats.discarded_unmatched}, "
        f"subject-free: {stats.discarded_subject_free}) -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def _numbered_examples(
    sources: list[str], texts: list[str], prefix: str, parse_one
) -> list[Example]:
    if len(sources) != len(texts):
        raise _fail(f"{len(sources)} inputs but {len(texts)} texts; files must align")
    width = max(4, len(str(len(sources))))
    examples = []
    for i, (source, text) in enumerate(zip(sources, texts), 1):
        if not text.strip():
            raise _fail(f"entry {i}: empty text")
        try:
            triples = parse_one(source)
        except InputParseError as exc:
            raise _fail(f"entry {i}: {exc}") from exc
        if not triples:
            raise _fail(f"entry {i}: no triples")
        examples.append(
            Example(id=f"{prefix}{i:0{width}d}", triples=tuple(triples), text=text.strip())
        )
    return examples


def cmd_convert_e2e(args: argparse.Namespace) -> int:
    mrs = [line.rstrip("\n") for line in _read_lines(args.mrs) if line.strip()]
    texts = [line.rstrip("\n") for line in _read_lines(args.texts) if line.strip()]
    examples = _numbered_examples(mrs, texts, args.id_prefix, parse_e2e_mr)
    write_examples_jsonl(examples, args.out)
    print(f"wrote {len(examples)} examples -> {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_convert_triples(args: argparse.Namespace) -> int:
    blocks = [b for b in _read_text(args.triples).split("\n\n") if b.strip()]
    texts = [line.rstrip("\n") for line in _read_lines(args.texts) if line.strip()]
    examples = _numbered_examples(blocks, texts, args.id_prefix, parse_pipe_triples)
    write_examples_jsonl(examples, args.out)
    print(f"wrote {len(examples)} examples -> {args.out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factcheck",
        description="NLI-based semantic accuracy checking for data-to-text output.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="run the two-direction check over a corpus")
    ev.add_argument("--input", required=True, help="corpus JSONL (id, triples, text)")
    ev.add_argument("--out", required=True, help="results JSONL path")
    ev.add_argument(
        "--templates",
        help="registry TSV path, or 'e2e' for the built-in restaurant templates "
        "(default: no templates, backoff for everything)",
    )
    ev.add_argument("--backoff-only", action="store_true", help="ignore templates, always use the backoff form")
    ev.add_argument("--raw-backoff", action="store_true", help="backoff inserts the predicate verbatim instead of humanizing it")
    ev.add_argument("--endpoint", help=f"NLI service URL (default: ${ENDPOINT_ENV})")
    ev.add_argument("--fixture", help="JSON fixture file instead of a live service")
    ev.add_argument("--mode", choices=[m.value for m in CheckMode], default=CheckMode.BOTH.value)
    ev.add_argument("--seed", type=int, default=None, help="template selection seed (default 0 or registry file's)")
    ev.add_argument("--parallelism", type=int, default=1)
    ev.add_argument("--batch-size", type=int, default=16)
    ev.add_argument("--timeout", type=float, default=30.0)
    ev.add_argument("--retries", type=int, default=2)
    ev.add_argument("--no-cache", action="store_true")
    ev.add_argument("--fail-fast", action="store_true", help="abort on the first failed example")
    ev.set_defaults(func=cmd_evaluate)

    sc = sub.add_parser("score", help="score results against gold labels")
    sc.add_argument("--results", required=True, help="results JSONL from 'evaluate'")
    gold_src = sc.add_mutually_exclusive_group(required=True)
    gold_src.add_argument("--gold", help="corpus JSONL with gold labels (and optional human_score)")
    gold_src.add_argument("--ratings", help="CSV of averaged human ratings")
    sc.add_argument("--threshold", type=float, default=2.5, help="ratings score at or above which an item is OK")
    sc.add_argument("--ratings-id-column", default="id")
    sc.add_argument("--ratings-score-column", default="score")
    sc.add_argument("--ratings-text-column", default="text")
    sc.add_argument("--allow-unlabeled", action="store_true", help="exclude results without gold instead of failing")
    sc.add_argument("--out", help="write the score report JSON here")
    sc.set_defaults(func=cmd_score)

    ex = sub.add_parser("extract-templates", help="delexicalize single-triple references into a registry")
    ex.add_argument("--input", required=True, help="corpus JSONL of single-triple examples")
    ex.add_argument("--out", required=True, help="registry TSV path")
    ex.add_argument("--seed", type=int, default=None)
    ex.add_argument("--keep-subject-free", action="store_true", help="keep patterns whose subject never appears in the reference")
    ex.set_defaults(func=cmd_extract_templates)

    ce = sub.add_parser("convert-e2e", help="convert MR + text line files to corpus JSONL")
    ce.add_argument("--mrs", required=True, help="one attr[value] MR per line")
    ce.add_argument("--texts", required=True, help="one generated text per line, aligned with --mrs")
    ce.add_argument("--out", required=True)
    ce.add_argument("--id-prefix", default="e2e-")
    ce.set_defaults(func=cmd_convert_e2e)

    ct = sub.add_parser("convert-triples", help="convert pipe-triple blocks + texts to corpus JSONL")
    ct.add_argument("--triples", required=True, help="subject | predicate | object lines, blank line between examples")
    ct.add_argument("--texts", required=True, help="one generated text per line, aligned with the blocks")
    ct.add_argument("--out", required=True)
    ct.add_argument("--id-prefix", default="ex-")
    ct.set_defaults(func=cmd_convert_triples)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (InputParseError, ValueError) as exc:
        # Bad flag values (batch size, threshold, ...) surface as ValueError
        # from the config dataclasses; both are caller mistakes.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
