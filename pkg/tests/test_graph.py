import numpy as np
import pytest

from gca.errors import ContractError
from gca.gateway import mock_embed
from gca.graph import build_graph, build_relation_types, graph_dump, tail_node
from gca.types import Triple, TripleEmbedding, canonicalize_entity


def embed(t: Triple) -> TripleEmbedding:
    return TripleEmbedding(
        mock_embed(canonicalize_entity(t.head)), mock_embed(t.relation), mock_embed(canonicalize_entity(t.tail))
    )


def graph_of(triples, theta_r=0.8):
    embs = [embed(t) for t in triples]
    table = build_relation_types([t.relation for t in triples], [e.rel_vec for e in embs], theta_r)
    return build_graph(triples, embs, table), table


def test_paris_graph_shares_head_node():
    g, _ = graph_of([
        Triple("Paris", "is", "the capital of France"),
        Triple("Paris", "possession", "Eiffel Tower"),
    ])
    assert len(g.nodes) == 3 and len(g.edges) == 2
    assert [n.label for n in g.nodes] == ["paris", "capital of france", "eiffel tower"]
    assert {e.source for e in g.edges} == {g.node_index()["paris"]}
    assert tail_node(g, Triple("Paris", "possession", "Eiffel Tower")) == 2


def test_empty_graph():
    g, table = graph_of([])
    assert len(g.nodes) == 0 and len(g.edges) == 0 and len(table) == 0
    assert g.matrix().shape == (0, 0)


def test_duplicate_triple_gives_parallel_edges():
    t = Triple("Paris", "is", "the capital of France")
    once, _ = graph_of([t])
    twice, _ = graph_of([t, t])
    assert len(twice.edges) == 2 and len(twice.nodes) == 2
    np.testing.assert_allclose(twice.matrix(), once.matrix(), atol=1e-15)


def test_relation_types_from_mock_cosines():
    rels = ["is", "is", "possession"]
    vecs = [mock_embed(r) for r in rels]
    # Measured mock cosine of "is"/"possession" is 0.0, below the 0.80 default.
    assert float(vecs[0] @ vecs[2]) < 0.8
    table = build_relation_types(rels, vecs, 0.8)
    assert len(table) == 2
    assert table.entries == {0: ("is",), 1: ("possession",)}


def test_exact_duplicates_merge_and_single_relation():
    v = mock_embed("won")
    assert len(build_relation_types(["won", "won"], [v, v], 0.8)) == 1
    table = build_relation_types(["won"], [v], 0.8)
    assert table.entries == {0: ("won",)} and table.type_of("won") == 0


def test_relation_types_are_transitive():
    a = np.array([1.0, 0.0])
    b = np.array([np.cos(0.5), np.sin(0.5)])
    c = np.array([np.cos(1.0), np.sin(1.0)])
    # a~b and b~c but not a~c: union-find still puts all three together.
    table = build_relation_types(["a", "b", "c"], [a, b, c], 0.85)
    assert table.entries == {0: ("a", "b", "c")}
    assert table.representative(0) == "a"


def test_relation_without_type_is_a_contract_error():
    table = build_relation_types(["is"], [mock_embed("is")], 0.8)
    with pytest.raises(ContractError):
        table.type_of("was")


def test_node_vectors_are_unit_and_order_independent():
    ts = [
        Triple("Marie Curie", "won", "Nobel Prize"),
        Triple("Marie Curie", "married", "Pierre Curie"),
        Triple("Pierre Curie", "won", "Nobel Prize"),
    ]
    g, _ = graph_of(ts)
    assert np.allclose(np.linalg.norm(g.matrix(), axis=1), 1.0, atol=1e-12)
    h, _ = graph_of(ts[::-1])
    # Same labelled graph up to node renumbering.
    gi, hi = g.node_index(), h.node_index()
    assert set(gi) == set(hi)
    for label in gi:
        np.testing.assert_array_equal(g.nodes[gi[label]].vector, h.nodes[hi[label]].vector)
    as_labels = lambda graph: sorted(
        (graph.nodes[e.source].label, e.surface, graph.nodes[e.target].label) for e in graph.edges
    )
    assert as_labels(g) == as_labels(h)


def test_graph_dump_layout():
    g, _ = graph_of([Triple("Paris", "is", "the capital of France")])
    dump = graph_dump(g, np.eye(2, g.dim))
    assert [n["label"] for n in dump["nodes"]] == ["paris", "capital of france"]
    assert dump["edges"] == [{"src": 0, "type": 0, "surface": "is", "dst": 1}]
    assert dump["relation_types"] == {"0": ["is"]}
    assert len(dump["propagated"]) == 2
