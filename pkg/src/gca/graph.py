"""Per-response knowledge graphs.

Entities become nodes merged by canonical label, and each triple becomes one
directed head -> tail edge. Relation surface forms are grouped into types by
union-find over relation-embedding cosine so that the RGCN can share one
weight matrix per type.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import ContractError
from .serialize import register, to_plain
from .types import Edge, KnowledgeGraph, Node, Triple, TripleEmbedding, canonicalize_entity, record


class UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, u: int) -> int:
        while self.parent[u] != u:
            self.parent[u] = self.parent[self.parent[u]]
            u = self.parent[u]
        return u

    def union(self, u: int, v: int) -> None:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return
        if self.rank[ru] < self.rank[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        if self.rank[ru] == self.rank[rv]:
            self.rank[ru] += 1


@register
@record
class RelationTypeTable:
    """Relation-type id -> member surface forms; the first member is the representative."""

    entries: dict[int, tuple[str, ...]]
    theta_r: float

    def __post_init__(self):
        object.__setattr__(self, "entries", {int(k): tuple(v) for k, v in self.entries.items()})
        seen: set[str] = set()
        for members in self.entries.values():
            for m in members:
                if m in seen:
                    raise ContractError(f"relation {m!r} belongs to two types")
                seen.add(m)

    def type_of(self, surface: str) -> int:
        for tid, members in self.entries.items():
            if surface in members:
                return tid
        raise ContractError(f"relation {surface!r} has no type")

    def representative(self, type_id: int) -> str:
        return self.entries[type_id][0]

    def __len__(self) -> int:
        return len(self.entries)


def build_relation_types(
    all_relations: Sequence[str], rel_vecs: Sequence[np.ndarray], theta_r: float
) -> RelationTypeTable:
    """Group relation surface forms whose embeddings have cosine >= theta_r.

    Identical strings always share a type. Type ids follow first appearance.
    Vectors are assumed unit-norm (the gateway guarantees it).
    """
    if len(all_relations) != len(rel_vecs):
        raise ContractError("relations and vectors are not aligned")
    surfaces: list[str] = []
    vecs: list[np.ndarray] = []
    for s, v in zip(all_relations, rel_vecs):
        if s not in surfaces:
            surfaces.append(s)
            vecs.append(np.asarray(v, dtype=np.float64))
    uf = UnionFind(len(surfaces))
    if surfaces:
        mat = np.vstack(vecs)
        sims = mat @ mat.T
        for i in range(len(surfaces)):
            for j in range(i + 1, len(surfaces)):
                if sims[i, j] >= theta_r:
                    uf.union(i, j)
    root_to_id: dict[int, int] = {}
    entries: dict[int, list[str]] = {}
    for i, s in enumerate(surfaces):
        root = uf.find(i)
        if root not in root_to_id:
            root_to_id[root] = len(root_to_id)
            entries[root_to_id[root]] = []
        entries[root_to_id[root]].append(s)
    return RelationTypeTable({k: tuple(v) for k, v in entries.items()}, theta_r)


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def build_graph(
    triples: Sequence[Triple],
    embeddings: Sequence[TripleEmbedding],
    rel_types: RelationTypeTable,
) -> KnowledgeGraph:
    if len(triples) != len(embeddings):
        raise ContractError("one embedding per triple is required")
    labels: list[str] = []
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}

    def add(label: str, vec: np.ndarray) -> None:
        if label not in sums:
            labels.append(label)
            sums[label] = np.zeros_like(vec)
            counts[label] = 0
        sums[label] = sums[label] + vec
        counts[label] += 1

    ends = []
    for t, emb in zip(triples, embeddings):
        h, tl = canonicalize_entity(t.head), canonicalize_entity(t.tail)
        add(h, emb.head_vec)
        add(tl, emb.tail_vec)
        ends.append((h, tl))

    index = {label: i for i, label in enumerate(labels)}
    nodes = tuple(Node(index[lb], lb, _unit(sums[lb] / counts[lb])) for lb in labels)
    edges = []
    used: dict[int, list[str]] = {}
    for t, emb, (h, tl) in zip(triples, embeddings, ends):
        tid = rel_types.type_of(t.relation)
        edges.append(Edge(index[h], tid, t.relation, emb.rel_vec, index[tl]))
        members = used.setdefault(tid, [])
        if t.relation not in members:
            members.append(t.relation)
    return KnowledgeGraph(nodes, tuple(edges), {k: tuple(v) for k, v in sorted(used.items())})


def tail_node(graph: KnowledgeGraph, triple: Triple) -> int:
    return graph.node_index()[canonicalize_entity(triple.tail)]


def graph_dump(graph: KnowledgeGraph, propagated: Optional[np.ndarray] = None) -> dict:
    """Plain-data dump: nodes (id, label, vector), edges (src, type, surface, dst)."""
    out = {
        "nodes": [{"id": n.id, "label": n.label, "vector": to_plain(n.vector)} for n in graph.nodes],
        "edges": [
            {"src": e.source, "type": e.rel_type, "surface": e.surface, "dst": e.target}
            for e in graph.edges
        ],
        "relation_types": {str(k): list(v) for k, v in graph.relation_types.items()},
    }
    if propagated is not None:
        out["propagated"] = [
            {"id": n.id, "vector": to_plain(propagated[n.id])} for n in graph.nodes
        ]
    return out
