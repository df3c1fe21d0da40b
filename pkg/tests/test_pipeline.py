import pytest

from gca.gateway import Gateway, MockEmbeddingProvider, MockRule
from gca.pipeline import Detector, same_head_counts, source_name
from gca.scenario import load_scenario
from gca.types import DetectorConfig, Verdict

import helpers


def test_consistent_response_scores_high(scenario_gateway):
    det = Detector(scenario_gateway)
    a = det.analyze(det.sample_set(helpers.QUERY, helpers.GOOD, helpers.SAMPLES))
    assert len(a.details) == 3
    for d in a.details:
        assert d.card.consistency == 10 and d.card.per_sample_deltas == (1,) * 10
        assert d.normalized_consistency == 1.0
        assert (d.card.s_head, d.card.s_rel, d.card.s_tail) == (1.0, 1.0, 1.0)
        assert d.card.fused == 4.0
    assert len(a.fact_context.fact_triples) == 3


def test_fabricated_triple_scores_zero(scenario_gateway):
    det = Detector(scenario_gateway)
    a = det.analyze(det.sample_set(helpers.QUERY, helpers.BAD, helpers.SAMPLES))
    fused = {d.card.triple.relation: d.card for d in a.details}
    fake = fused["invented"]
    assert fake.consistency == 0
    assert (fake.s_head, fake.s_rel, fake.s_tail) == (0.0, 0.0, 0.0)
    assert fake.fused == 0.0
    assert fused["married"].fused == 4.0
    assert a.score(0.0) == 0.0
    assert a.apply_threshold(2.0, 0.0) is Verdict.HALLUCINATION
    # The fabricated triple shares its head with the sampled triples but aligns with none.
    counts = same_head_counts(a)
    assert counts[1] == [3] * 10


def test_draws_samples_when_missing(scenario_gateway):
    det = Detector(scenario_gateway, DetectorConfig(sample_count=4))
    sset = det.sample_set(helpers.QUERY, helpers.GOOD)
    assert sset.sample_count == 4 and sset.sampled == tuple(helpers.SAMPLES[:4])
    reps = [rep for req, rep in scenario_gateway.chat_provider.calls if req.tag == "sample"]
    assert reps == [0, 1, 2, 3]


def test_sample_without_triples_is_tolerated(scenario_gateway):
    det = Detector(scenario_gateway)
    a = det.analyze(det.sample_set(helpers.QUERY, helpers.GOOD, helpers.SAMPLES[:9] + ["Unrelated text."]))
    assert "sample-10: no triples extracted" in a.warnings
    assert a.details[0].card.per_sample_deltas[-1] == 0
    assert a.details[0].card.consistency == 9


def test_skipped_task_renormalizes(make_gateway):
    gw = make_gateway(rules=[
        MockRule("Triple: (Paris, is, capital of France)", tag="extract"),
        MockRule("Triple: (Paris, is, capital of France)", tag="verify"),
        MockRule("Which city is the capital of France?", tag="heqa-question"),
        MockRule("Paris", tag="heqa-answer"),
        MockRule("(Paris, is, capital of France)", tag="rr-predict"),
        MockRule("yes", tag="rr-judge"),
        MockRule("nothing useful", tag="ftste-replace"),
    ])
    det = Detector(gw, DetectorConfig(sample_count=1))
    a = det.analyze(det.sample_set("q", "Paris is the capital of France.", ["Paris is the capital of France."]))
    (d,) = a.details
    assert d.card.s_tail is None and d.tasks["ftste"].skipped
    assert d.card.fused == pytest.approx(4 / 3 * 3.0, abs=1e-12)


def test_source_names():
    assert source_name(None) == "original" and source_name(0) == "sample-1"


def test_scenario_file_round_trip(tmp_path):
    scenario, _ = helpers.write_scenario_files(tmp_path)
    det = Detector(Gateway(load_scenario(scenario), MockEmbeddingProvider()))
    a = det.analyze(det.sample_set(helpers.QUERY, helpers.GOOD, helpers.SAMPLES))
    assert [d.card.fused for d in a.details] == [4.0, 4.0, 4.0]
