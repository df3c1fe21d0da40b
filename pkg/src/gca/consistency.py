"""Cross-graph triple alignment and signed consistency counting.

For an original triple i and sampled response j, every sampled triple whose
head matches is compared. If its relation is similar enough it is
*aligned*, and a similar tail (after propagation) adds +1. Otherwise it is
*unaligned* with the same head, and a similar tail subtracts 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError
from .graph import tail_node
from .rgcn import PropagatedGraph
from .serialize import register
from .types import Triple, TripleEmbedding, canonicalize_entity, record


@register
@record
class AlignmentRecord:
    orig_index: int
    sample_index: int
    aligned: tuple[int, ...] = ()
    unaligned_same_head: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "aligned", tuple(self.aligned))
        object.__setattr__(self, "unaligned_same_head", tuple(self.unaligned_same_head))
        if set(self.aligned) & set(self.unaligned_same_head):
            raise ContractError("a sampled triple cannot be both aligned and unaligned")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def heads_match(a: Triple, a_vec: np.ndarray, b: Triple, b_vec: np.ndarray, theta_h: float) -> bool:
    if canonicalize_entity(a.head) == canonicalize_entity(b.head):
        return True
    return cosine(a_vec, b_vec) >= theta_h


def align(
    orig: Triple,
    orig_emb: TripleEmbedding,
    sample_triples: Sequence[Triple],
    sample_embs: Sequence[TripleEmbedding],
    theta_r: float,
    theta_h: float,
    orig_index: int = 0,
    sample_index: int = 0,
) -> AlignmentRecord:
    if len(sample_triples) != len(sample_embs):
        raise ContractError("one embedding per sampled triple is required")
    aligned, unaligned = [], []
    for k, (t, emb) in enumerate(zip(sample_triples, sample_embs)):
        if not heads_match(orig, orig_emb.head_vec, t, emb.head_vec, theta_h):
            continue
        if cosine(orig_emb.rel_vec, emb.rel_vec) >= theta_r:
            aligned.append(k)
        else:
            unaligned.append(k)
    return AlignmentRecord(orig_index, sample_index, tuple(aligned), tuple(unaligned))


def score_sample(
    orig_tail: np.ndarray,
    rec: AlignmentRecord,
    sample_tails: Sequence[np.ndarray],
    theta_t: float,
    saturate: bool = False,
) -> int:
    """Signed count over one sampled response.

    ``sample_tails[k]`` is the propagated tail-node embedding of sampled
    triple k. With ``saturate`` the result is clipped to [-1, 1].
    """
    c = 0
    for k in rec.aligned:
        if cosine(orig_tail, sample_tails[k]) > theta_t:
            c += 1
    for k in rec.unaligned_same_head:
        if cosine(orig_tail, sample_tails[k]) > theta_t:
            c -= 1
    if saturate:
        c = max(-1, min(1, c))
    return c


def total_consistency(per_sample: Sequence[int]) -> int:
    return int(sum(per_sample))


@dataclass(frozen=True)
class ResponseView:
    """Triples of one response together with their embeddings and propagated graph."""

    triples: tuple[Triple, ...]
    embeddings: tuple[TripleEmbedding, ...]
    graph: PropagatedGraph

    def tail_vectors(self) -> list[np.ndarray]:
        return [self.graph.vector(tail_node(self.graph.base, t)) for t in self.triples]


def consistency_table(
    original: ResponseView,
    samples: Sequence[ResponseView],
    theta_r: float,
    theta_t: float,
    theta_h: float,
    saturate: bool = False,
) -> tuple[list[list[int]], list[list[AlignmentRecord]]]:
    """Per original triple: the list of c_{i,j} over samples and the alignment records."""
    orig_tails = original.tail_vectors()
    sample_tails = [s.tail_vectors() for s in samples]
    deltas: list[list[int]] = []
    records: list[list[AlignmentRecord]] = []
    for i, (t, emb) in enumerate(zip(original.triples, original.embeddings)):
        row, recs = [], []
        for j, s in enumerate(samples):
            rec = align(t, emb, s.triples, s.embeddings, theta_r, theta_h, i, j)
            row.append(score_sample(orig_tails[i], rec, sample_tails[j], theta_t, saturate))
            recs.append(rec)
        deltas.append(row)
        records.append(recs)
    return deltas, records
