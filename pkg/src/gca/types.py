"""Shared domain records for the detector.

Every record is a frozen dataclass. Vector-valued fields hold read-only
numpy arrays, so equality is defined field-wise with ``np.array_equal``
instead of the dataclass default.
"""

from __future__ import annotations

import dataclasses
import re
import string
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ContractError, RejectedInputError


class Verdict(str, Enum):
    FACT = "fact"
    HALLUCINATION = "hallucination"
    UNDECIDED = "undecided"


class NormalizationMode(str, Enum):
    NEIGHBOR_COUNT = "neighbor-count"
    CONSTANT = "constant"


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


class Objective(str, Enum):
    F1 = "f1"
    ACCURACY = "accuracy"


def _values_equal(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (
            isinstance(a, np.ndarray)
            and isinstance(b, np.ndarray)
            and a.shape == b.shape
            and bool(np.array_equal(a, b))
        )
    if isinstance(a, (tuple, list)) and isinstance(b, (tuple, list)):
        return len(a) == len(b) and all(_values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_values_equal(a[k], b[k]) for k in a)
    return a == b


def record(cls):
    """Frozen dataclass with array-aware equality."""
    cls = dataclass(frozen=True, eq=False)(cls)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return all(
            _values_equal(getattr(self, f.name), getattr(other, f.name))
            for f in dataclasses.fields(self)
        )

    cls.__eq__ = __eq__
    cls.__hash__ = None
    return cls


def frozen_vector(values, *, what: str = "vector") -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ContractError(f"{what} must be a non-empty 1-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{what} has non-finite components")
    arr.setflags(write=False)
    return arr


def frozen_matrix(values, d: int, *, what: str = "matrix") -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != (d, d):
        raise ContractError(f"{what} must be {d}x{d}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{what} has non-finite entries")
    arr.setflags(write=False)
    return arr


_OUTER_PUNCT = string.punctuation + "“”‘’«»…–—"
_ARTICLE = re.compile(r"^(?:the|a|an)\s+")


def canonicalize_entity(raw: str) -> str:
    """Normalize an entity surface form for sameness checks.

    Lowercases, collapses whitespace, strips punctuation at both ends and
    drops a leading English article. Applied to a fixed point, so the
    result is idempotent.

    >>> canonicalize_entity("The Eiffel Tower ")
    'eiffel tower'
    """
    if not raw or not raw.strip():
        raise RejectedInputError("entity text is empty")
    text = unicodedata.normalize("NFC", raw)
    while True:
        prev = text
        text = " ".join(text.lower().split())
        text = text.strip(_OUTER_PUNCT).strip()
        text = _ARTICLE.sub("", text)
        if text == prev:
            break
    if not text:
        raise RejectedInputError(f"entity {raw!r} is empty after normalization")
    return text


@record
class Triple:
    head: str
    relation: str
    tail: str
    source_response: str = "original"
    ordinal: int = 0

    def __post_init__(self):
        for name in ("head", "relation", "tail"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise RejectedInputError(f"triple {name} is empty")
            object.__setattr__(self, name, value.strip())
        if self.ordinal < 0:
            raise RejectedInputError("triple ordinal must be >= 0")
        if not self.source_response:
            raise RejectedInputError("triple source_response is empty")

    def as_text(self) -> str:
        return f"({self.head}, {self.relation}, {self.tail})"

    def with_relation(self, relation: str) -> str:
        return f"({self.head}, {relation}, {self.tail})"


@record
class SampleSet:
    query: str
    original: str
    sampled: tuple[str, ...]
    sample_count: int

    def __post_init__(self):
        object.__setattr__(self, "sampled", tuple(self.sampled))
        if not self.original.strip():
            raise RejectedInputError("original response is empty")
        if self.sample_count < 1 or self.sample_count != len(self.sampled):
            raise ContractError(
                f"sample_count={self.sample_count} but {len(self.sampled)} sampled responses"
            )

    @classmethod
    def of(cls, query: str, original: str, sampled) -> SampleSet:
        sampled = tuple(sampled)
        return cls(query, original, sampled, len(sampled))


@record
class TripleEmbedding:
    head_vec: np.ndarray
    rel_vec: np.ndarray
    tail_vec: np.ndarray

    def __post_init__(self):
        vecs = [frozen_vector(getattr(self, n), what=n) for n in ("head_vec", "rel_vec", "tail_vec")]
        if len({v.shape for v in vecs}) != 1:
            raise ContractError("triple embedding vectors differ in dimension")
        for n, v in zip(("head_vec", "rel_vec", "tail_vec"), vecs):
            object.__setattr__(self, n, v)

    @property
    def dim(self) -> int:
        return int(self.head_vec.shape[0])


@record
class Node:
    id: int
    label: str
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", frozen_vector(self.vector, what=f"node {self.label!r}"))


@record
class Edge:
    source: int
    rel_type: int
    surface: str
    rel_vec: np.ndarray
    target: int

    def __post_init__(self):
        object.__setattr__(self, "rel_vec", frozen_vector(self.rel_vec, what="edge rel_vec"))


@record
class KnowledgeGraph:
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    relation_types: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(
            self, "relation_types", {int(k): tuple(v) for k, v in self.relation_types.items()}
        )
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(ids))):
            raise ContractError("node ids must be 0..N-1 in order")
        labels = [n.label for n in self.nodes]
        if len(set(labels)) != len(labels):
            raise ContractError("node labels must be unique")
        dims = {n.vector.shape[0] for n in self.nodes}
        if len(dims) > 1:
            raise ContractError("node embeddings differ in dimension")
        for e in self.edges:
            if not (0 <= e.source < len(ids) and 0 <= e.target < len(ids)):
                raise ContractError(f"edge endpoint missing: {e.source}->{e.target}")

    @property
    def dim(self) -> int:
        return int(self.nodes[0].vector.shape[0]) if self.nodes else 0

    def node_index(self) -> dict[str, int]:
        return {n.label: n.id for n in self.nodes}

    def matrix(self) -> np.ndarray:
        """Node embeddings stacked row-wise, shape (N, d)."""
        if not self.nodes:
            return np.zeros((0, 0))
        return np.vstack([n.vector for n in self.nodes])


@record
class RgcnParams:
    layers: int
    self_weights: tuple[np.ndarray, ...]
    relation_weights: tuple[dict[int, np.ndarray], ...]
    normalization_mode: NormalizationMode = NormalizationMode.NEIGHBOR_COUNT
    activation: Activation = Activation.RELU
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ContractError("RGCN needs at least one layer")
        if len(self.self_weights) != self.layers or len(self.relation_weights) != self.layers:
            raise ContractError("one self weight and one relation-weight table per layer")
        object.__setattr__(self, "normalization_mode", NormalizationMode(self.normalization_mode))
        object.__setattr__(self, "activation", Activation(self.activation))
        d = self.self_weights[0].shape[0]
        object.__setattr__(
            self, "self_weights", tuple(frozen_matrix(w, d, what="W_0") for w in self.self_weights)
        )
        object.__setattr__(
            self,
            "relation_weights",
            tuple(
                {int(r): frozen_matrix(w, d, what=f"W_{r}") for r, w in table.items()}
                for table in self.relation_weights
            ),
        )

    @property
    def dim(self) -> int:
        return int(self.self_weights[0].shape[0])


@record
class TripleScoreCard:
    triple: Triple
    consistency: int
    per_sample_deltas: tuple[int, ...]
    s_head: Optional[float]
    s_rel: Optional[float]
    s_tail: Optional[float]
    fused: float
    verdict: Verdict = Verdict.UNDECIDED

    def __post_init__(self):
        object.__setattr__(self, "per_sample_deltas", tuple(int(c) for c in self.per_sample_deltas))
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        if self.consistency != sum(self.per_sample_deltas):
            raise ContractError(
                f"consistency {self.consistency} != sum of deltas {sum(self.per_sample_deltas)}"
            )
        for name in ("s_head", "s_rel", "s_tail"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ContractError(f"{name}={v} outside [0, 1]")

    def normalized_consistency(self, n: int) -> float:
        return normalized_consistency(self.consistency, n)


def normalized_consistency(c: int, n: int) -> float:
    """C_i / n clipped to [-1, 1]; accumulation over same-head triples can exceed n."""
    if n <= 0:
        return 0.0
    return float(min(1.0, max(-1.0, c / n)))


def _check_unit_interval(name: str, value: float, *, open_: bool = True) -> None:
    ok = 0.0 < value < 1.0 if open_ else 0.0 <= value <= 1.0
    if not ok:
        raise ContractError(f"{name}={value} outside {'(0, 1)' if open_ else '[0, 1]'}")


@record
class DetectorConfig:
    theta_r: float = 0.80
    theta_t: float = 0.80
    theta_h: float = 0.90
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    sample_count: int = 10
    heqa_answers: int = 5
    rr_predictions: int = 5
    ftste_selections: int = 5
    rgcn_layers: int = 2
    mix_alpha: float = 0.3
    rel_perturb_eps: float = 0.1
    gen_temperature: float = 1.0
    extract_temperature: float = 0.0
    response_rule_rho: float = 0.0
    activation: Activation = Activation.RELU
    normalization_mode: NormalizationMode = NormalizationMode.NEIGHBOR_COUNT
    seed: int = 0
    fact_context_cap: int = 5
    fact_context_min: float = 0.5
    saturate_per_sample: bool = False
    objective: Objective = Objective.F1
    grid_size: int = 256
    tau: Optional[float] = None
    max_concurrency: int = 4

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "activation", Activation(self.activation))
        object.__setattr__(self, "normalization_mode", NormalizationMode(self.normalization_mode))
        object.__setattr__(self, "objective", Objective(self.objective))
        for name in ("theta_r", "theta_t", "theta_h"):
            _check_unit_interval(name, getattr(self, name))
        _check_unit_interval("mix_alpha", self.mix_alpha, open_=False)
        _check_unit_interval("response_rule_rho", self.response_rule_rho, open_=False)
        if len(self.weights) != 4:
            raise ContractError("weights must have four entries")
        for name in (
            "sample_count", "heqa_answers", "rr_predictions", "ftste_selections",
            "rgcn_layers", "fact_context_cap", "grid_size", "max_concurrency",
        ):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.rel_perturb_eps < 0:
            raise ContractError("rel_perturb_eps must be >= 0")
        if self.gen_temperature < 0 or self.extract_temperature < 0:
            raise ContractError("temperatures must be >= 0")

    def replace(self, **changes) -> DetectorConfig:
        return dataclasses.replace(self, **changes)


@record
class CalibrationResult:
    mean: float
    std: float
    chosen_threshold: float
    objective: Objective
    grid: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective(self.objective))
        object.__setattr__(self, "grid", tuple((float(a), float(b)) for a, b in self.grid))
