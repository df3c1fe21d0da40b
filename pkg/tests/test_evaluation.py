import json
from fractions import Fraction

import jsonschema
import numpy as np
import pytest

from gca.errors import ContractError, CorpusError, StorageError
from gca.evaluation import (
    emit_report,
    load_corpus,
    read_corpus,
    report_dict,
    report_scores,
    rescore_report,
    run_corpus,
    summary_csv,
)
from gca.metrics import confusion, metrics, metrics_from_counts
from gca.pipeline import Detector
from gca.schemas import report_schema
from gca.types import DetectorConfig, Verdict

import helpers
from oracles import brute_confusion


def write_lines(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows), encoding="utf-8")
    return path


def row(i, label="fact", **extra):
    return {"id": f"s{i}", "query": "q", "response": f"response {i}", "label": label, **extra}


# -- corpus -------------------------------------------------------------------


def test_three_valid_lines(tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [row(1), row(2, "hallucination"), row(3, samples=["a", "b"])])
    corpus = load_corpus(path)
    assert [s.id for s in corpus] == ["s1", "s2", "s3"]
    assert corpus[2].samples == ("a", "b") and corpus[0].samples is None


def test_missing_label_is_skipped_with_line_number(tmp_path):
    bad = row(2)
    del bad["label"]
    path = write_lines(tmp_path / "c.jsonl", [row(1), bad, "{not json", row(4, label="maybe")])
    samples, diags = read_corpus(path)
    assert [s.id for s in samples] == ["s1"]
    assert [d.line for d in diags] == [2, 3, 4]
    assert "label" in diags[0].message and str(diags[0]).startswith("line 2:")


def test_duplicate_ids_name_the_id(tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [row(1), row(1)])
    with pytest.raises(CorpusError, match="'s1'"):
        load_corpus(path)


def test_no_valid_samples(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(write_lines(tmp_path / "c.jsonl", ["[]"]))
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "absent.jsonl")


# -- metrics ------------------------------------------------------------------


def test_metrics_direct_formula():
    m = metrics_from_counts(tp=2, fp=1, fn=1, tn=0)
    assert m.precision == pytest.approx(2 / 3, abs=1e-12)
    assert m.recall == pytest.approx(2 / 3, abs=1e-12)
    assert m.f1 == pytest.approx(2 / 3, abs=1e-12)


def test_all_correct():
    golds = ["fact", "hallucination", "fact"]
    assert metrics(golds, golds).accuracy == 1.0


def test_no_positive_predictions():
    m = metrics(["fact", "fact"], ["hallucination", "fact"])
    assert m.precision == 0.0 and m.f1 == 0.0
    assert "precision-undefined" in m.flags


def test_length_mismatch_and_undecided():
    with pytest.raises(ContractError):
        confusion(["fact"], [])
    with pytest.raises(ContractError):
        confusion(["undecided"], ["fact"])


def test_metrics_match_brute_force():
    rng = np.random.default_rng(5)
    labels = ["fact", "hallucination"]
    for _ in range(50):
        n = int(rng.integers(1, 30))
        preds = [labels[i] for i in rng.integers(0, 2, n)]
        golds = [labels[i] for i in rng.integers(0, 2, n)]
        m, ref = metrics(preds, golds), brute_confusion(preds, golds)
        assert (m.tp, m.fp, m.fn, m.tn) == (ref["tp"], ref["fp"], ref["fn"], ref["tn"])
        for k in ("precision", "recall", "f1", "accuracy"):
            assert abs(Fraction(getattr(m, k)) - ref[k]) <= Fraction(1, 10**12)


# -- corpus runs and reports --------------------------------------------------


@pytest.fixture
def scenario_run(scenario_gateway, tmp_path):
    _, corpus_path = helpers.write_scenario_files(tmp_path)
    return run_corpus(Detector(scenario_gateway), load_corpus(corpus_path))


def test_run_calibrates_and_judges(scenario_run):
    run = scenario_run
    assert run.tau_source == "calibrated" and run.tau == 2.0
    assert [r.prediction for r in run.results] == [Verdict.FACT, Verdict.HALLUCINATION]
    assert run.metrics.f1 == 1.0 and run.metrics.accuracy == 1.0


def test_configured_tau_is_used(scenario_gateway, tmp_path):
    _, corpus_path = helpers.write_scenario_files(tmp_path)
    run = run_corpus(Detector(scenario_gateway, DetectorConfig(tau=5.0)), load_corpus(corpus_path))
    assert run.tau_source == "config" and run.calibration is None
    assert [r.prediction for r in run.results] == [Verdict.HALLUCINATION] * 2


def test_report_matches_schema(scenario_run):
    report = report_dict(scenario_run)
    jsonschema.validate(report, report_schema())
    assert len(report["samples"]) == 2
    assert report["samples"][1]["triples"][1]["verdict"] == "hallucination"


def test_report_is_deterministic(scenario_run, tmp_path):
    a = emit_report(scenario_run, tmp_path / "a.json").read_bytes()
    b = emit_report(scenario_run, tmp_path / "b.json").read_bytes()
    assert a == b
    assert json.loads(a)["schema"] == "gca-report/1"


def test_report_write_failure(scenario_run, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(StorageError):
        emit_report(scenario_run, blocker / "report.json")


def test_empty_corpus_rejected(scenario_gateway):
    with pytest.raises(CorpusError):
        run_corpus(Detector(scenario_gateway), [])


def test_csv_and_rescore(scenario_run):
    report = report_dict(scenario_run)
    lines = summary_csv(report).splitlines()
    assert lines[0].startswith("id,label,prediction,response_score")
    assert lines[1] == "good,fact,fact,4,3,0,"
    assert lines[2] == "bad,hallucination,hallucination,0,3,1,"
    assert report_scores(report) == ([4.0, 0.0], ["fact", "hallucination"])
    assert rescore_report(report, 10.0).accuracy == 0.5


def test_errored_sample_is_reported(make_gateway, tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [row(1, samples=["x"])])
    run = run_corpus(Detector(make_gateway()), load_corpus(path))
    (r,) = run.results
    assert r.error.startswith("ProviderError") and r.prediction is Verdict.UNDECIDED
    jsonschema.validate(report_dict(run), report_schema())
