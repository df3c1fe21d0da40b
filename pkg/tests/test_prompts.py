"""Golden strings: rendered prompts must carry the template text verbatim."""

import pytest

from gca import prompts
from gca.extraction import format_triples
from gca.reverse import (
    FactContext,
    ftste_replacement_prompt,
    ftste_selection_prompt,
    heqa_answer_prompt,
    heqa_question_prompt,
    rr_judge_prompt,
    rr_prediction_prompt,
)
from gca.types import Triple

from golden import (
    EXTRACTION,
    FTSTE_REPLACE,
    FTSTE_SELECT,
    HEQA_ANSWER,
    HEQA_EXAMPLE,
    HEQA_GENERATION,
    RR_JUDGE,
    RR_PREDICTION,
    VERIFICATION,
    VERIFICATION_TAIL,
)

T = Triple("Paris", "possession", "Eiffel Tower")
CTX = FactContext((Triple("Paris", "is", "the capital of France"), T, Triple("Paris", "possession", "Louvre")))


def test_extraction_prompt():
    p = prompts.render("extraction", verified_response="Paris is lovely.")
    assert EXTRACTION in p
    assert 'Triple: ("The Girl Who Loved Tom Gordon", published in, 1999)' in p
    assert p.endswith("<Response>Paris is lovely.")


def test_verification_prompt():
    p = prompts.render("verification", verified_response="R", triples=format_triples([T]))
    assert VERIFICATION in p and VERIFICATION_TAIL in p
    assert "<Response>R\n<Triples>Triple: (Paris, possession, Eiffel Tower).\n" in p


def test_heqa_prompts():
    p = heqa_question_prompt(T, CTX)
    assert HEQA_GENERATION in p and HEQA_EXAMPLE in p
    assert p.endswith(
        "<Input>\nFact triples:(Paris, is, the capital of France)\n"
        "Triplet: (Paris, possession, Louvre)\n"
        "Verification triple:(Paris, possession, Eiffel Tower)"
    )
    assert heqa_answer_prompt("Which city?") == HEQA_ANSWER + "\nWhich city?"


def test_rr_prompts():
    p = rr_prediction_prompt(T, CTX)
    assert RR_PREDICTION in p
    assert "Provide information:(Paris, is, the capital of France),(Paris, possession, Louvre)\n" in p
    assert "Masked triple:(Paris, mask, Eiffel Tower)\n" in p
    j = rr_judge_prompt("(a, b, c)", "(a, d, c)")
    assert j.startswith(RR_JUDGE) and j.endswith("<Input>\n(a, b, c);\n(a, d, c)")


def test_ftste_prompts():
    p = ftste_replacement_prompt(T)
    assert FTSTE_REPLACE in p and "E:(Beijing, capital, France)" in p
    assert p.endswith("<Input>\n(Paris, possession, Eiffel Tower)")
    s = ftste_selection_prompt(T, CTX, [f"({k})" for k in "abcdef"])
    assert FTSTE_SELECT in s and "<Output>EF" in s
    assert s.endswith("A: (a)\nB: (b)\nC: (c)\nD: (d)\nE: (e)\nF: (f)")


def test_slot_values_are_not_reinterpreted():
    p = prompts.render("consistency_comparison", triple1="{triple2}", triple2="x")
    assert p.endswith("{triple2};\nx")


def test_unknown_slot_and_template():
    with pytest.raises(KeyError):
        prompts.render("extraction", nope="x")
    with pytest.raises(KeyError):
        prompts.template("missing")
