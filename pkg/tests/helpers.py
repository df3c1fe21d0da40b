from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from gca.types import Edge, KnowledgeGraph, Node

FACTS = [
    ("Marie Curie", "was born in", "Warsaw"),
    ("Marie Curie", "won", "the Nobel Prize in Physics"),
    ("Marie Curie", "married", "Pierre Curie"),
    ("Pierre Curie", "was born in", "Paris"),
]
FABRICATED = ("Marie Curie", "invented", "the telephone")

QUERY = "Tell me about Marie Curie."
GOOD = "Marie Curie was born in Warsaw. She won the Nobel Prize in Physics and married Pierre Curie."
BAD = "Marie Curie was born in Warsaw. She invented the telephone and married Pierre Curie."
SAMPLES = [f"Sampled biography {k}: Marie Curie, Warsaw, the Nobel Prize, Pierre Curie." for k in range(10)]


def scenario_data(n_samples: int = 10) -> dict:
    responses = {GOOD: FACTS[:3], BAD: [FACTS[0], FABRICATED, FACTS[2]]}
    for s in SAMPLES[:n_samples]:
        responses[s] = FACTS
    return {
        "responses": {k: [list(t) for t in v] for k, v in responses.items()},
        "beliefs": [list(t) for t in FACTS],
        "samples": {QUERY: SAMPLES[:n_samples]},
    }


def write_scenario_files(tmp: Path, with_samples: bool = True) -> tuple[Path, Path]:
    scenario = tmp / "scenario.json"
    scenario.write_text(json.dumps(scenario_data()), encoding="utf-8")
    corpus = tmp / "corpus.jsonl"
    rows = [
        {"id": "good", "query": QUERY, "response": GOOD, "label": "fact"},
        {"id": "bad", "query": QUERY, "response": BAD, "label": "hallucination"},
    ]
    if with_samples:
        for r in rows:
            r["samples"] = SAMPLES
    corpus.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return scenario, corpus


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_graph(rng: np.random.Generator, n_nodes: int, d: int, n_types: int = 4,
                 connected: bool = False, extra_edges: int | None = None,
                 nonnegative: bool = False) -> KnowledgeGraph:
    x = unit_rows(rng, n_nodes, d)
    if nonnegative:
        x = np.abs(x)
    edges = []
    if connected:
        for v in range(1, n_nodes):
            u = int(rng.integers(0, v))
            a, b = (u, v) if rng.random() < 0.5 else (v, u)
            edges.append((a, int(rng.integers(0, n_types)), b))
    k = int(rng.integers(0, n_nodes + 1)) if extra_edges is None else extra_edges
    for _ in range(k):
        a, b = (int(i) for i in rng.integers(0, n_nodes, size=2))
        edges.append((a, int(rng.integers(0, n_types)), b))
    nodes = tuple(Node(i, f"n{i}", x[i]) for i in range(n_nodes))
    used = sorted({r for _, r, _ in edges})
    return KnowledgeGraph(
        nodes,
        tuple(Edge(a, r, f"rel{r}", np.ones(d) / np.sqrt(d), b) for a, r, b in edges),
        {r: (f"rel{r}",) for r in used},
    )


def edge_list(graph: KnowledgeGraph) -> list[tuple[int, int, int]]:
    return [(e.source, e.rel_type, e.target) for e in graph.edges]
