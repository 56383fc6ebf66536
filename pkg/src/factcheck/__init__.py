"""Semantic accuracy checking for data-to-text generation.

Input facts are rendered to sentences through templates, then a natural
language inference model is asked two questions: does the generated text
entail every fact (omission check), and do the facts entail the text
(hallucination check). The answers combine into a four-way verdict.
"""

from .backend import (
    BackendConfig,
    BackendError,
    BackendUnavailableError,
    CachingBackend,
    FixtureBackend,
    FixtureMissError,
    HttpBackend,
    NliBackend,
    NliRequest,
    ProtocolError,
    check,
    classify_batch,
)
from .evaluator import (
    CheckMode,
    ExampleResult,
    RunStats,
    check_hallucination,
    check_omissions,
    concatenate_facts,
    evaluate_corpus,
    evaluate_example,
)
from .ingestion import (
    InputParseError,
    RatingsConfig,
    load_ratings,
    parse_e2e_mr,
    parse_jsonl,
    parse_pipe_triples,
)
from .metrics import (
    Confusion,
    CorrelationUndefinedError,
    GoldMismatchError,
    MetricWarning,
    PredictedLabel,
    ScoreReport,
    SpearmanResult,
    error_size_correlation,
    score,
    spearman,
)
from .templates import (
    Template,
    TemplateRegistry,
    default_e2e_registry,
    delexicalize,
    empty_registry,
    extract_templates,
    humanize_predicate,
    load_registry,
    normalize_predicate,
    render_backoff,
    save_registry,
)
from .types import (
    CheckDirection,
    CheckResult,
    Example,
    Fact,
    FineVerdict,
    GoldLabel,
    NliDistribution,
    RoughVerdict,
    Triple,
    Verdict,
    label_argmax,
)

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BackendError",
    "BackendUnavailableError",
    "CachingBackend",
    "CheckDirection",
    "CheckMode",
    "CheckResult",
    "Confusion",
    "CorrelationUndefinedError",
    "Example",
    "ExampleResult",
    "Fact",
    "FineVerdict",
    "FixtureBackend",
    "FixtureMissError",
    "GoldLabel",
    "GoldMismatchError",
    "HttpBackend",
    "InputParseError",
    "MetricWarning",
    "NliBackend",
    "NliDistribution",
    "NliRequest",
    "PredictedLabel",
    "ProtocolError",
    "RatingsConfig",
    "RoughVerdict",
    "RunStats",
    "ScoreReport",
    "SpearmanResult",
    "Template",
    "TemplateRegistry",
    "Triple",
    "Verdict",
    "check",
    "check_hallucination",
    "check_omissions",
    "classify_batch",
    "concatenate_facts",
    "default_e2e_registry",
    "delexicalize",
    "empty_registry",
    "error_size_correlation",
    "evaluate_corpus",
    "evaluate_example",
    "extract_templates",
    "humanize_predicate",
    "label_argmax",
    "load_ratings",
    "load_registry",
    "normalize_predicate",
    "parse_e2e_mr",
    "parse_jsonl",
    "parse_pipe_triples",
    "render_backoff",
    "save_registry",
    "score",
    "spearman",
]
