"""End-to-end scoring of one original response against its sampled responses."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .consistency import AlignmentRecord, ResponseView, consistency_table, total_consistency
from .errors import ExtractionEmptyError
from .extraction import ExtractionOutcome, extract_and_verify
from .gateway import ChatRequest, EmbeddingRequest, Gateway
from .graph import RelationTypeTable, build_graph, build_relation_types
from .reverse import FactContext, TaskOutcome, ftste, heqa, rr, select_fact_context
from .rgcn import init_params, propagate
from .scoring import fuse_available, response_score, verdict_response, verdict_triple
from .types import (
    DetectorConfig,
    SampleSet,
    Triple,
    TripleEmbedding,
    TripleScoreCard,
    Verdict,
    canonicalize_entity,
    normalized_consistency,
)

log = logging.getLogger(__name__)


@dataclass
class TripleDetail:
    card: TripleScoreCard
    normalized_consistency: float
    tasks: dict[str, TaskOutcome]
    alignments: list[AlignmentRecord]


@dataclass
class ResponseAnalysis:
    """Scores for every triple of one original response; verdicts are set later."""

    sample_set: SampleSet
    details: list[TripleDetail]
    views: list[ResponseView]
    relation_types: RelationTypeTable
    fact_context: FactContext
    warnings: list[str] = field(default_factory=list)

    @property
    def cards(self) -> list[TripleScoreCard]:
        return [d.card for d in self.details]

    def fused(self) -> list[float]:
        return [d.card.fused for d in self.details]

    def score(self, rho: float) -> Optional[float]:
        return response_score(self.fused(), rho) if self.details else None

    def apply_threshold(self, tau: float, rho: float) -> Verdict:
        for d in self.details:
            d.card = _with_verdict(d.card, verdict_triple(d.card.fused, tau))
        return verdict_response(self.cards, rho)


def _with_verdict(card: TripleScoreCard, verdict: Verdict) -> TripleScoreCard:
    return TripleScoreCard(
        card.triple, card.consistency, card.per_sample_deltas,
        card.s_head, card.s_rel, card.s_tail, card.fused, verdict,
    )


def source_name(j: Optional[int]) -> str:
    return "original" if j is None else f"sample-{j + 1}"


class Detector:
    def __init__(self, gateway: Gateway, cfg: Optional[DetectorConfig] = None):
        self.gateway = gateway
        self.cfg = cfg or DetectorConfig()

    def sample_responses(self, query: str, n: Optional[int] = None) -> list[str]:
        n = self.cfg.sample_count if n is None else n
        request = ChatRequest(query, self.cfg.gen_temperature, tag="sample")
        return [self.gateway.chat(request, repetition=j) for j in range(n)]

    def sample_set(self, query: str, original: str, sampled: Optional[Sequence[str]] = None) -> SampleSet:
        if sampled is None:
            sampled = self.sample_responses(query)
        return SampleSet.of(query, original, sampled)

    def extract(self, response: str, source: str = "original") -> ExtractionOutcome:
        return extract_and_verify(response, self.gateway, source, self.cfg.extract_temperature)

    def embed_triples(self, triples: Sequence[Triple]) -> list[TripleEmbedding]:
        if not triples:
            return []
        texts = []
        for t in triples:
            texts += [canonicalize_entity(t.head), t.relation, canonicalize_entity(t.tail)]
        vecs = self.gateway.embed(EmbeddingRequest(tuple(texts)))
        return [TripleEmbedding(*vecs[3 * k:3 * k + 3]) for k in range(len(triples))]

    def analyze(self, sample_set: SampleSet) -> ResponseAnalysis:
        cfg = self.cfg
        warnings: list[str] = []
        original = self.extract(sample_set.original, source_name(None))
        warnings += list(original.warnings)
        sampled: list[tuple[Triple, ...]] = []
        for j, text in enumerate(sample_set.sampled):
            try:
                outcome = self.extract(text, source_name(j)) if text.strip() else None
            except ExtractionEmptyError:
                outcome = None
            if outcome is None:
                warnings.append(f"{source_name(j)}: no triples extracted")
                sampled.append(())
            else:
                sampled.append(outcome.triples)

        all_triples = [original.triples, *sampled]
        embeddings = [self.embed_triples(ts) for ts in all_triples]
        relations = [t.relation for ts in all_triples for t in ts]
        rel_vecs = [e.rel_vec for es in embeddings for e in es]
        table = build_relation_types(relations, rel_vecs, cfg.theta_r)
        d = embeddings[0][0].dim
        params = init_params(len(table), d, cfg)

        views = []
        for ts, es in zip(all_triples, embeddings):
            g = build_graph(ts, es, table)
            views.append(ResponseView(tuple(ts), tuple(es), propagate(g, params)))

        deltas, records = consistency_table(
            views[0], views[1:], cfg.theta_r, cfg.theta_t, cfg.theta_h, cfg.saturate_per_sample
        )
        n = sample_set.sample_count
        c_norm = [normalized_consistency(total_consistency(row), n) for row in deltas]
        ctx = select_fact_context(original.triples, c_norm, cfg.fact_context_cap, cfg.fact_context_min)

        details = []
        for i, t in enumerate(original.triples):
            tasks = {
                "heqa": heqa(t, ctx, self.gateway, cfg.heqa_answers, cfg.theta_h, cfg.gen_temperature),
                "rr": rr(t, ctx, self.gateway, cfg.rr_predictions, cfg.gen_temperature),
                "ftste": ftste(t, ctx, self.gateway, cfg.ftste_selections, cfg.seed, cfg.gen_temperature),
            }
            s_h, s_r, s_t = (tasks[k].score for k in ("heqa", "rr", "ftste"))
            card = TripleScoreCard(
                triple=t,
                consistency=total_consistency(deltas[i]),
                per_sample_deltas=tuple(deltas[i]),
                s_head=s_h,
                s_rel=s_r,
                s_tail=s_t,
                fused=fuse_available(s_h, s_r, s_t, c_norm[i], cfg.weights),
            )
            details.append(TripleDetail(card, c_norm[i], tasks, records[i]))
            for task in tasks.values():
                warnings += [f"triple {i} {task.task.value}: {w}" for w in task.warnings]
        return ResponseAnalysis(sample_set, details, views, table, ctx, warnings)


def same_head_counts(analysis: ResponseAnalysis) -> list[list[int]]:
    """Per original triple and sample: how many sampled triples share its head."""
    return [
        [len(r.aligned) + len(r.unaligned_same_head) for r in d.alignments]
        for d in analysis.details
    ]

