import pytest

from gca.errors import ExtractionEmptyError, RejectedInputError
from gca.extraction import (
    extract_and_verify,
    extract_triples,
    format_triples,
    parse_triple_lines,
    split_fields,
    verify_triples,
)
from gca.gateway import MockRule
from gca.types import Triple

PARIS = (
    "Paris, the capital of France, is a city with a long history and full of romance. "
    "Not only is there the world-famous Eiffel Tower and Louvre Museum, but it also has "
    "a unique artistic atmosphere and rich cultural heritage."
)
PARIS_TRIPLES = """Triple: (Paris, is, the capital of France)
Triple: (Paris, possession, long history)
Triple: (Paris, full, romantic)
Triple: (Paris, possession, Eiffel Tower)
Triple: (Paris, possession, Louvre)
Triple: (Paris, possessions, unique artistic atmosphere)
Triple: (Paris, possessions, rich cultural heritage)"""


def keys(triples):
    return [(t.head, t.relation, t.tail) for t in triples]


def test_paris_example(make_gateway):
    gw = make_gateway(rules=[MockRule(PARIS_TRIPLES, tag="extract")])
    out = extract_triples(PARIS, gw)
    assert ("Paris", "is", "the capital of France") in keys(out.triples)
    assert ("Paris", "possession", "Eiffel Tower") in keys(out.triples)
    assert len(out.triples) == 7
    assert [t.ordinal for t in out.triples] == list(range(7))
    assert out.raw_model_text == PARIS_TRIPLES


def test_single_scripted_triple(make_gateway):
    gw = make_gateway(rules=[MockRule("Triple: (a, b, c)", tag="extract")])
    assert keys(extract_triples("some text", gw).triples) == [("a", "b", "c")]


def test_wrong_arity_is_dropped(make_gateway):
    gw = make_gateway(rules=[MockRule("Triple: (a, b)", tag="extract")])
    with pytest.raises(ExtractionEmptyError) as info:
        extract_triples("some text", gw)
    assert info.value.raw_text == "Triple: (a, b)"

    gw = make_gateway(rules=[MockRule("Triple: (a, b)\nTriple: (x, y, z)", tag="extract")])
    out = extract_triples("some text", gw)
    assert keys(out.triples) == [("x", "y", "z")]
    assert any("malformed" in w for w in out.warnings)


def test_empty_response_rejected(make_gateway):
    with pytest.raises(RejectedInputError):
        extract_triples("  ", make_gateway(default=""))


def test_quoted_head_with_commas():
    (t,) = parse_triple_lines('Triple: ("The Girl Who Loved Tom Gordon", published in, 1999)')
    assert (t.head, t.relation, t.tail) == ("The Girl Who Loved Tom Gordon", "published in", "1999")


def test_quoted_tail_keeps_inner_commas():
    (t,) = parse_triple_lines(
        'Triple: ("The Girl Who Loved Tom Gordon", explores themes of, '
        '"isolation, fear, and the power of imagination")'
    )
    assert t.tail == "isolation, fear, and the power of imagination"


def test_parse_edge_cases():
    assert parse_triple_lines("") == []
    text = "Triple: (a, b, c)\nnot a triple\nTriple: (d, e, f)"
    assert keys(parse_triple_lines(text)) == [("a", "b", "c"), ("d", "e", "f")]
    assert parse_triple_lines("(a, b, c)") == []


def test_split_fields_nested_parens():
    assert split_fields("Einstein (physicist), won, prize") == ["Einstein (physicist)", "won", "prize"]
    assert split_fields('a "b, c", d') == ['a "b, c"', "d"]
    # An unbalanced quote is treated as a literal character.
    assert split_fields('6" pipe, is, short') == ['6" pipe', "is", "short"]


def test_format_round_trip():
    ts = [Triple("a", "b", "c"), Triple("d", "e", "f", ordinal=1)]
    assert keys(parse_triple_lines(format_triples(ts))) == keys(ts)


def test_verify_replaces_pronoun(make_gateway):
    gw = make_gateway(rules=[MockRule("Triple: (Einstein, won, prize)", tag="verify")])
    out = verify_triples("Einstein won the prize.", [Triple("it", "won", "prize")], gw)
    assert keys(out.triples) == [("Einstein", "won", "prize")]
    assert out.corrected == (True,)
    pronouns = {"it", "he", "she", "they"}
    assert not any(t.head.lower() in pronouns or t.tail.lower() in pronouns for t in out.triples)


def test_verify_echo_is_identity(make_gateway):
    ts = [Triple("a", "b", "c"), Triple("d", "e", "f", ordinal=1)]
    gw = make_gateway(rules=[MockRule(format_triples(ts), tag="verify")])
    out = verify_triples("text", ts, gw)
    assert out.triples == tuple(ts)
    assert out.corrected == (False, False)
    assert out.warnings == ()


def test_verify_garbage_falls_back(make_gateway):
    ts = [Triple("a", "b", "c")]
    gw = make_gateway(rules=[MockRule("I cannot help with that.", tag="verify")])
    out = verify_triples("text", ts, gw)
    assert out.triples == tuple(ts)
    assert len(out.warnings) == 1


def test_extract_and_verify_keeps_source(make_gateway):
    gw = make_gateway(rules=[
        MockRule("Triple: (it, won, prize)", tag="extract"),
        MockRule("Triple: (Einstein, won, prize)", tag="verify"),
    ])
    out = extract_and_verify("text", gw, source="sample-2")
    assert out.triples[0].source_response == "sample-2"
    assert out.triples[0].head == "Einstein"
