"""Deterministic relational graph convolution over a knowledge graph.

Each layer computes, for every node v,

    e_v' = act( sum_r sum_{u in N_r(v)} W_r e_u / c_{v,r}  +  W_0 e_v )

with incoming and outgoing edges of a relation type treated as two separate
channels that share W_r, so information flows both ways along an edge.
No training is involved: :func:`init_params` builds identity-anchored
weights that blend a node with the mean of its typed neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, UndefinedStatsError
from .serialize import register
from .types import (
    Activation,
    DetectorConfig,
    KnowledgeGraph,
    NormalizationMode,
    RgcnParams,
    frozen_vector,
    record,
)


@register
@record
class PropagatedGraph:
    base: KnowledgeGraph
    layers: int
    node_out: dict[int, np.ndarray]

    def __post_init__(self):
        out = {int(k): frozen_vector(v, what=f"node {k} output") for k, v in self.node_out.items()}
        if set(out) != {n.id for n in self.base.nodes}:
            raise ContractError("propagated outputs must cover every node")
        object.__setattr__(self, "node_out", out)

    def matrix(self) -> np.ndarray:
        if not self.node_out:
            return np.zeros((0, 0))
        return np.vstack([self.node_out[n.id] for n in self.base.nodes])

    def vector(self, node_id: int) -> np.ndarray:
        return self.node_out[node_id]


def sign_pattern(seed: int, rel_type: int, layer: int, d: int) -> np.ndarray:
    rng = np.random.default_rng([seed, rel_type, layer])
    return rng.choice(np.array([-1.0, 1.0]), size=d)


def init_params(rel_type_count: int, d: int, cfg: Optional[DetectorConfig] = None) -> RgcnParams:
    """W_0 = (1 - alpha) I and W_r = alpha (I + eps diag(s_r)), s_r a seeded +-1 pattern.

    With alpha = 0 propagation is the identity on nonnegative inputs; with
    eps = 0 all relation types share one matrix (plain GCN behaviour).
    """
    cfg = cfg or DetectorConfig()
    if rel_type_count < 0 or d <= 0:
        raise ContractError("need rel_type_count >= 0 and d > 0")
    alpha, eps = cfg.mix_alpha, cfg.rel_perturb_eps
    eye = np.eye(d)
    self_w, rel_w = [], []
    for layer in range(cfg.rgcn_layers):
        self_w.append((1.0 - alpha) * eye)
        rel_w.append({
            r: alpha * (eye + eps * np.diag(sign_pattern(cfg.seed, r, layer, d)))
            for r in range(rel_type_count)
        })
    return RgcnParams(
        layers=cfg.rgcn_layers,
        self_weights=tuple(self_w),
        relation_weights=tuple(rel_w),
        normalization_mode=cfg.normalization_mode,
        activation=cfg.activation,
        seed=cfg.seed,
    )


def channel_operators(graph: KnowledgeGraph, mode: NormalizationMode) -> list[tuple[int, np.ndarray]]:
    """Normalized adjacency per (relation type, direction), as (type id, N x N matrix).

    Row v of a matrix averages (or sums, in constant mode) the neighbour set
    N_r(v); rows without neighbours are zero.
    """
    n = len(graph.nodes)
    out = []
    for r in sorted({e.rel_type for e in graph.edges}):
        fwd = np.zeros((n, n))
        inv = np.zeros((n, n))
        for e in graph.edges:
            if e.rel_type == r:
                fwd[e.target, e.source] = 1.0
                inv[e.source, e.target] = 1.0
        for adj in (fwd, inv):
            if mode is NormalizationMode.NEIGHBOR_COUNT:
                c = adj.sum(axis=1, keepdims=True)
                c[c == 0] = 1.0
                adj = adj / c
            out.append((r, adj))
    return out


def _activate(x: np.ndarray, act: Activation) -> np.ndarray:
    return np.maximum(x, 0.0) if act is Activation.RELU else x


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return x / safe


def propagate(graph: KnowledgeGraph, params: RgcnParams) -> PropagatedGraph:
    if not graph.nodes:
        return PropagatedGraph(graph, params.layers, {})
    missing = {e.rel_type for e in graph.edges} - set(params.relation_weights[0])
    if missing:
        raise ContractError(f"no RGCN weights for relation types {sorted(missing)}")
    if graph.dim != params.dim:
        raise ContractError(f"graph dimension {graph.dim} != parameter dimension {params.dim}")
    ops = channel_operators(graph, params.normalization_mode)
    h = graph.matrix()
    for layer in range(params.layers):
        acc = h @ params.self_weights[layer].T
        for r, adj in ops:
            acc = acc + adj @ h @ params.relation_weights[layer][r].T
        h = _activate(acc, params.activation)
    h = _unit_rows(h)
    return PropagatedGraph(graph, params.layers, {node.id: h[node.id] for node in graph.nodes})


@dataclass(frozen=True)
class CosineStats:
    min: float
    max: float
    avg: float
    std: float


@dataclass(frozen=True)
class SimilarityComparison:
    before: CosineStats
    after: CosineStats


def _cosine_matrix(x: np.ndarray) -> np.ndarray:
    u = _unit_rows(x)
    return u @ u.T


def connected_pairs(graph: KnowledgeGraph) -> list[tuple[int, int]]:
    return sorted({tuple(sorted((e.source, e.target))) for e in graph.edges if e.source != e.target})


def cosine_stats(x: np.ndarray, pairs: Optional[list[tuple[int, int]]] = None) -> CosineStats:
    """Pairwise cosine statistics over all node pairs, or only the given pairs."""
    if x.shape[0] < 2:
        raise UndefinedStatsError("need at least two nodes for pairwise statistics")
    sims = _cosine_matrix(x)
    if pairs is None:
        iu = np.triu_indices(x.shape[0], k=1)
        vals = sims[iu]
    else:
        if not pairs:
            raise UndefinedStatsError("no node pairs to compare")
        vals = np.array([sims[i, j] for i, j in pairs])
    return CosineStats(float(vals.min()), float(vals.max()), float(vals.mean()), float(vals.std()))


def neighbor_similarity_stats(
    before: KnowledgeGraph, after: PropagatedGraph, connected_only: bool = False
) -> SimilarityComparison:
    if [n.id for n in before.nodes] != [n.id for n in after.base.nodes]:
        raise ContractError("graphs do not share a node set")
    pairs = connected_pairs(before) if connected_only else None
    return SimilarityComparison(cosine_stats(before.matrix(), pairs), cosine_stats(after.matrix(), pairs))
