"""Serialization round trips, file atomicity, CLI exit codes, determinism."""
import json
import subprocess
import sys

import pytest

from factcheck import (
    Example,
    FineVerdict,
    FixtureBackend,
    GoldLabel,
    RoughVerdict,
    Triple,
    empty_registry,
    evaluate_corpus,
    load_registry,
    parse_jsonl,
)
from factcheck.cli import main
from factcheck.reporting import (
    atomic_write_text,
    format_score_table,
    read_results_jsonl,
    result_to_dict,
    results_to_jsonl,
    write_examples_jsonl,
)

from conftest import ENTAIL, FAIL_CONTRA


def small_corpus():
    return [
        Example(
            id="a",
            triples=(Triple("S", "p", "O"),),
            text="S text.",
            gold=GoldLabel(rough=RoughVerdict.OK),
        ),
        Example(
            id="b",
            triples=(Triple("S", "q", "P"), Triple("S", "r", "Q")),
            text="S other text.",
            gold=GoldLabel(rough=RoughVerdict.NOT_OK, fine=FineVerdict.OMISSION),
            human_score=2.0,
        ),
    ]


def backend_for(examples, failing_ids=()):
    table = {}
    for ex in examples:
        facts = [f"The {t.predicate} of {t.subject} is {t.object}." for t in ex.triples]
        for fact in facts:
            table[(ex.text, fact)] = FAIL_CONTRA if ex.id in failing_ids else ENTAIL
        table[(" ".join(facts), ex.text)] = ENTAIL
    return FixtureBackend(table)


def test_results_jsonl_round_trip():
    examples = small_corpus()
    results, _ = evaluate_corpus(examples, empty_registry(), backend_for(examples, {"b"}))
    records = read_results_jsonl(results_to_jsonl(results).splitlines())
    assert [r.example_id for r in records] == ["a", "b"]
    assert records[0].fine is FineVerdict.OK
    assert records[1].fine is FineVerdict.OMISSION
    assert records[1].per_fact_passed == (False, False)
    assert records[1].n_facts == 2
    assert records[0].confidence == results[0].verdict.confidence


def test_errored_results_serialize_as_error_lines():
    examples = small_corpus()
    backend = backend_for(examples[:1])  # example "b" misses the fixture
    results, _ = evaluate_corpus(examples, empty_registry(), backend)
    lines = results_to_jsonl(results).splitlines()
    payload = json.loads(lines[1])
    assert set(payload) == {"id", "error"}
    records = read_results_jsonl(lines)
    assert records[1].error is not None
    assert records[1].to_predicted().errored is True


def test_result_dict_contains_check_distributions():
    examples = small_corpus()[:1]
    results, _ = evaluate_corpus(examples, empty_registry(), backend_for(examples))
    payload = result_to_dict(results[0])
    assert payload["checks"][0]["direction"] == "fact_check"
    assert payload["checks"][-1]["direction"] == "text_check"
    for check in payload["checks"]:
        total = check["contradiction"] + check["neutral"] + check["entailment"]
        assert total == pytest.approx(1.0, abs=1e-4)


def test_examples_jsonl_round_trip(tmp_path):
    examples = small_corpus()
    path = tmp_path / "corpus.jsonl"
    write_examples_jsonl(examples, path)
    parsed = parse_jsonl(path.read_text().splitlines())
    assert parsed == examples


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    atomic_write_text(target, "new")
    assert target.read_text() == "new"
    assert list(tmp_path.iterdir()) == [target]


def test_format_score_table_variants():
    from factcheck import PredictedLabel, score

    gold = {
        "a": GoldLabel(rough=RoughVerdict.OK),
        "b": GoldLabel(rough=RoughVerdict.NOT_OK),
    }
    preds = [
        PredictedLabel(example_id="a", rough=RoughVerdict.OK),
        PredictedLabel(example_id="b", rough=RoughVerdict.NOT_OK),
    ]
    table = format_score_table(score(preds, gold), confidence_rho=0.63)
    header, row, footer = table.strip().splitlines()
    assert header.split() == ["A", "R", "P", "F1", "rho"]
    assert row.split() == ["1.000", "1.000", "1.000", "1.000", "0.630"]
    assert footer == "n: 2  excluded: 0"

    gold_fine = {
        "a": GoldLabel(rough=RoughVerdict.OK, fine=FineVerdict.OK),
        "b": GoldLabel(rough=RoughVerdict.NOT_OK, fine=FineVerdict.OMISSION),
    }
    preds_fine = [
        PredictedLabel(example_id="a", rough=RoughVerdict.OK, fine=FineVerdict.OK),
        PredictedLabel(example_id="b", rough=RoughVerdict.NOT_OK, fine=FineVerdict.HALLUCINATION),
    ]
    table = format_score_table(score(preds_fine, gold_fine), error_size_rho="n/a")
    lines = table.strip().splitlines()
    assert lines[0].split() == ["Af", "Ar", "R", "P", "F1"]
    assert lines[1].split() == ["0.500", "1.000", "1.000", "1.000", "1.000"]
    assert lines[-1] == "error-vs-size rho: n/a"


@pytest.fixture
def workspace(tmp_path):
    examples = small_corpus()
    corpus = tmp_path / "corpus.jsonl"
    write_examples_jsonl(examples, corpus)

    table = {}
    for ex in examples:
        facts = [f"The {t.predicate} of {t.subject} is {t.object}." for t in ex.triples]
        entries = []
        for fact in facts:
            entries.append(
                {
                    "premise": ex.text,
                    "hypothesis": fact,
                    "contradiction": 0.7 if ex.id == "b" else 0.05,
                    "neutral": 0.2 if ex.id == "b" else 0.05,
                    "entailment": 0.1 if ex.id == "b" else 0.9,
                }
            )
        entries.append(
            {
                "premise": " ".join(facts),
                "hypothesis": ex.text,
                "contradiction": 0.05,
                "neutral": 0.05,
                "entailment": 0.9,
            }
        )
        table.setdefault("pairs", []).extend(entries)
    fixture = tmp_path / "fixture.json"
    fixture.write_text(json.dumps(table))
    return tmp_path, corpus, fixture


def test_cli_evaluate_and_score(workspace, capsys):
    tmp_path, corpus, fixture = workspace
    out = tmp_path / "results.jsonl"
    code = main(
        ["evaluate", "--input", str(corpus), "--fixture", str(fixture), "--out", str(out)]
    )
    assert code == 0
    records = read_results_jsonl(out.read_text().splitlines())
    assert records[0].fine is FineVerdict.OK
    assert records[1].fine is FineVerdict.OMISSION
    assert (tmp_path / "results.jsonl.stats.json").exists()

    report_path = tmp_path / "report.json"
    code = main(
        ["score", "--results", str(out), "--gold", str(corpus), "--out", str(report_path)]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "A" in printed and "F1" in printed
    report = json.loads(report_path.read_text())
    assert report["n"] == 2
    assert report["accuracy_rough"] == 1.0


def test_cli_determinism_across_parallelism(workspace):
    tmp_path, corpus, fixture = workspace
    outputs = []
    for run, parallelism in [(1, "1"), (2, "1"), (3, "8")]:
        out = tmp_path / f"results{run}.jsonl"
        code = main(
            [
                "evaluate",
                "--input", str(corpus),
                "--fixture", str(fixture),
                "--out", str(out),
                "--parallelism", parallelism,
                "--seed", "0",
            ]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_cli_error_exit_codes(workspace, tmp_path):
    _, corpus, fixture = workspace
    out = tmp_path / "r.jsonl"
    # Missing input file.
    assert main(["evaluate", "--input", str(tmp_path / "nope.jsonl"), "--fixture", str(fixture), "--out", str(out)]) == 2
    # Both backends specified.
    assert (
        main(
            [
                "evaluate", "--input", str(corpus), "--fixture", str(fixture),
                "--endpoint", "http://127.0.0.1:9", "--out", str(out),
            ]
        )
        == 2
    )
    # No backend at all.
    assert main(["evaluate", "--input", str(corpus), "--out", str(out)]) == 2
    # Bad flag value caught as config error.
    assert (
        main(
            [
                "evaluate", "--input", str(corpus), "--fixture", str(fixture),
                "--out", str(out), "--parallelism", "0",
            ]
        )
        == 2
    )


def test_cli_unreachable_endpoint_leaves_no_file(workspace, monkeypatch):
    tmp_path, corpus, _ = workspace
    out = tmp_path / "never.jsonl"
    code = main(
        [
            "evaluate", "--input", str(corpus), "--endpoint", "http://127.0.0.1:9",
            "--out", str(out), "--timeout", "0.2",
        ]
    )
    assert code == 1
    assert not out.exists()

    # The endpoint can come from the environment.
    monkeypatch.setenv("FACTCHECK_ENDPOINT", "http://127.0.0.1:9")
    code = main(
        ["evaluate", "--input", str(corpus), "--out", str(out), "--timeout", "0.2"]
    )
    assert code == 1
    assert not out.exists()


def test_cli_incomplete_fixture_records_errors(workspace, tmp_path):
    _, corpus, _ = workspace
    sparse = tmp_path / "sparse.json"
    sparse.write_text(json.dumps({"pairs": []}))
    out = tmp_path / "r.jsonl"
    code = main(
        ["evaluate", "--input", str(corpus), "--fixture", str(sparse), "--out", str(out)]
    )
    assert code == 0  # per-example failures are recorded, not fatal
    records = read_results_jsonl(out.read_text().splitlines())
    assert all(r.error is not None for r in records)

    code = main(
        [
            "evaluate", "--input", str(corpus), "--fixture", str(sparse),
            "--out", str(out), "--fail-fast",
        ]
    )
    assert code == 1


def test_cli_score_id_mismatch_is_config_error(workspace, tmp_path):
    tmp_path_ws, corpus, fixture = workspace
    out = tmp_path_ws / "results.jsonl"
    assert main(["evaluate", "--input", str(corpus), "--fixture", str(fixture), "--out", str(out)]) == 0
    other = tmp_path / "other.jsonl"
    write_examples_jsonl(
        [
            Example(
                id="zzz",
                triples=(Triple("S", "p", "O"),),
                text="S text.",
                gold=GoldLabel(rough=RoughVerdict.OK),
            )
        ],
        other,
    )
    assert main(["score", "--results", str(out), "--gold", str(other)]) == 2


def test_cli_score_with_ratings(workspace, capsys):
    tmp_path, corpus, fixture = workspace
    out = tmp_path / "results.jsonl"
    main(["evaluate", "--input", str(corpus), "--fixture", str(fixture), "--out", str(out)])
    ratings = tmp_path / "ratings.csv"
    ratings.write_text("id,text,score\na,S text.,3.0\nb,S other text.,1.5\n")
    code = main(["score", "--results", str(out), "--ratings", str(ratings)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "n: 2" in printed


def test_cli_backoff_flags(workspace, tmp_path):
    _, corpus, _ = workspace
    # Raw backoff changes the rendered fact for camelCase predicates.
    raw_corpus = tmp_path / "c.jsonl"
    write_examples_jsonl(
        [Example(id="x", triples=(Triple("S", "eatType", "pub"),), text="S text.")], raw_corpus
    )
    fixture = tmp_path / "fx.json"
    fixture.write_text(
        json.dumps({"pairs": [], "default": {"contradiction": 0.1, "neutral": 0.1, "entailment": 0.8}})
    )
    out = tmp_path / "r.jsonl"
    main(["evaluate", "--input", str(raw_corpus), "--fixture", str(fixture), "--out", str(out), "--backoff-only"])
    fact = json.loads(out.read_text().splitlines()[0])["facts"][0]
    assert fact["text"] == "The eat type of S is pub."
    assert fact["used_backoff"] is True

    main(
        [
            "evaluate", "--input", str(raw_corpus), "--fixture", str(fixture),
            "--out", str(out), "--backoff-only", "--raw-backoff",
        ]
    )
    fact = json.loads(out.read_text().splitlines()[0])["facts"][0]
    assert fact["text"] == "The eatType of S is pub."


def test_cli_mode_flag(workspace, tmp_path):
    _, corpus, fixture = workspace
    out = tmp_path / "r.jsonl"
    main(
        [
            "evaluate", "--input", str(corpus), "--fixture", str(fixture),
            "--out", str(out), "--mode", "omissions",
        ]
    )
    for line in out.read_text().splitlines():
        payload = json.loads(line)
        assert all(c["direction"] == "fact_check" for c in payload["checks"])


def test_cli_extract_templates(tmp_path):
    corpus = tmp_path / "singles.jsonl"
    write_examples_jsonl(
        [
            Example(
                id="s1",
                triples=(Triple("Aenir", "language", "English language"),),
                text="One of the languages of Aenir is English language.",
            ),
            Example(
                id="s2",
                triples=(Triple("René Goscinny", "nationality", "French people"),),
                text="René Goscinny was French people.",
            ),
        ],
        corpus,
    )
    registry_path = tmp_path / "reg.tsv"
    assert main(["extract-templates", "--input", str(corpus), "--out", str(registry_path)]) == 0
    registry = load_registry(str(registry_path))
    assert registry.render(Triple("Aenir", "language", "German")).text == (
        "One of the languages of Aenir is German."
    )
    assert registry.render(Triple("X", "nationality", "Belgian")).text == "X was Belgian."

    # Byte-identical on rerun with the same seed.
    again = tmp_path / "reg2.tsv"
    assert main(["extract-templates", "--input", str(corpus), "--out", str(again)]) == 0
    assert registry_path.read_bytes() == again.read_bytes()

    # Multi-triple examples are rejected.
    multi = tmp_path / "multi.jsonl"
    write_examples_jsonl(
        [Example(id="m", triples=(Triple("A", "p", "B"), Triple("A", "q", "C")), text="A.")],
        multi,
    )
    assert main(["extract-templates", "--input", str(multi), "--out", str(again)]) == 2


def test_cli_convert_e2e(tmp_path):
    mrs = tmp_path / "mrs.txt"
    mrs.write_text("name[The Punter], eatType[pub]\nname[Blue Spice], area[riverside]\n")
    texts = tmp_path / "texts.txt"
    texts.write_text("The Punter is a pub.\nBlue Spice sits by the river.\n")
    out = tmp_path / "corpus.jsonl"
    assert main(["convert-e2e", "--mrs", str(mrs), "--texts", str(texts), "--out", str(out)]) == 0
    examples = parse_jsonl(out.read_text().splitlines())
    assert [ex.id for ex in examples] == ["e2e-0001", "e2e-0002"]
    assert examples[0].triples == (Triple("The Punter", "eat_type", "pub"),)

    texts.write_text("Only one line.\n")
    assert main(["convert-e2e", "--mrs", str(mrs), "--texts", str(texts), "--out", str(out)]) == 2


def test_cli_convert_triples(tmp_path):
    triples = tmp_path / "triples.txt"
    triples.write_text(
        "Blue Spice | eat_type | pub\nBlue Spice | area | riverside\n\nThe Punter | food | Indian\n"
    )
    texts = tmp_path / "texts.txt"
    texts.write_text("Blue Spice is a riverside pub.\nThe Punter serves Indian.\n")
    out = tmp_path / "corpus.jsonl"
    assert main(["convert-triples", "--triples", str(triples), "--texts", str(texts), "--out", str(out)]) == 0
    examples = parse_jsonl(out.read_text().splitlines())
    assert len(examples) == 2
    assert len(examples[0].triples) == 2
    assert examples[1].triples[0].predicate == "food"


def test_cli_empty_input_writes_empty_results(tmp_path):
    corpus = tmp_path / "empty.jsonl"
    corpus.write_text("")
    fixture = tmp_path / "fx.json"
    fixture.write_text(json.dumps({"pairs": []}))
    out = tmp_path / "r.jsonl"
    assert main(["evaluate", "--input", str(corpus), "--fixture", str(fixture), "--out", str(out)]) == 0
    assert out.read_text() == ""


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "factcheck", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "evaluate" in proc.stdout
