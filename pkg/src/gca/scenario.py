"""A deterministic stand-in LLM that holds a fixed set of beliefs.

:class:`ScenarioResponder` answers every prompt the pipeline sends by
looking at the prompt's stage tag and content. Extraction returns the
triples scripted for a response text; the reverse-verification stages
answer from ``beliefs``, so a triple outside the belief set fails all
three reconstruction tasks. Plug it into :class:`~gca.gateway.MockChatProvider`
as the ``responder``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .extraction import split_fields
from .gateway import ChatRequest, MockChatProvider
from .types import canonicalize_entity

TripleTuple = tuple[str, str, str]
_PAREN = re.compile(r"\(([^()]*(?:\([^()]*\)[^()]*)*)\)")
_QUESTION = re.compile(r"Which entity is linked by \[(?P<rel>.*)\] to \[(?P<tail>.*)\]\?")


def _canon(t: TripleTuple) -> TripleTuple:
    return (canonicalize_entity(t[0]), " ".join(t[1].lower().split()), canonicalize_entity(t[2]))


def _triples_in(text: str) -> list[TripleTuple]:
    out = []
    for m in _PAREN.finditer(text):
        fields = split_fields(m.group(1))
        if len(fields) == 3 and all(fields):
            out.append((fields[0], fields[1], fields[2]))
    return out


def _fmt(t: TripleTuple) -> str:
    return f"({t[0]}, {t[1]}, {t[2]})"


@dataclass
class ScenarioResponder:
    """Prompt-aware scripted model.

    ``responses`` maps response text to its triples; ``samples`` maps a
    query to the sampled responses returned for repetitions 0..n-1.
    """

    responses: dict[str, list[TripleTuple]] = field(default_factory=dict)
    beliefs: Sequence[TripleTuple] = ()
    samples: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.responses = {k.strip(): [tuple(t) for t in v] for k, v in self.responses.items()}
        self._beliefs = {_canon(tuple(t)) for t in self.beliefs}

    def believes(self, t: TripleTuple) -> bool:
        try:
            return _canon(t) in self._beliefs
        except ValueError:
            return False

    def __call__(self, request: ChatRequest, repetition: int) -> Optional[str]:
        handler = getattr(self, "_" + request.tag.replace("-", "_"), None)
        return handler(request.prompt, repetition) if handler else None

    def _sample(self, prompt: str, rep: int) -> Optional[str]:
        texts = self.samples.get(prompt)
        return texts[rep % len(texts)] if texts else None

    def _extract(self, prompt: str, rep: int) -> str:
        text = prompt.rsplit("<Response>", 1)[1].strip()
        triples = self.responses.get(text, [])
        return "\n".join(f"Triple: {_fmt(t)}" for t in triples)

    def _verify(self, prompt: str, rep: int) -> str:
        body = prompt.rsplit("<Response>", 1)[1]
        return "\n".join(
            line for line in body.split("<Triples>", 1)[1].splitlines() if line.startswith("Triple:")
        )

    def _heqa_question(self, prompt: str, rep: int) -> str:
        verified = prompt.rsplit("Verification triple:", 1)[1]
        h, r, t = _triples_in(verified)[0]
        return f"Which entity is linked by [{r}] to [{t}]?"

    def _heqa_answer(self, prompt: str, rep: int) -> str:
        m = _QUESTION.search(prompt)
        if m:
            for h, r, t in self.beliefs:
                if _canon((h, r, t))[1:] == _canon(("x", m.group("rel"), m.group("tail")))[1:]:
                    return h
        return "I am not sure"

    def _rr_predict(self, prompt: str, rep: int) -> str:
        h, _, t = _triples_in(prompt.rsplit("Masked triple:", 1)[1])[0]
        for bh, br, bt in self.beliefs:
            if (canonicalize_entity(bh), canonicalize_entity(bt)) == (canonicalize_entity(h), canonicalize_entity(t)):
                return _fmt((h, br, t))
        return _fmt((h, "is unrelated to", t))

    def _rr_judge(self, prompt: str, rep: int) -> str:
        pair = _triples_in(prompt.rsplit("<Input>", 1)[1])
        if len(pair) == 2 and _canon(pair[0]) == _canon(pair[1]):
            return "yes"
        return "no"

    def _ftste_replace(self, prompt: str, rep: int) -> str:
        h, r, _ = _triples_in(prompt.rsplit("<Input>", 1)[1])[0]
        return "\n".join(f"{L}:({h}, {r}, decoy {k + 1})" for k, L in enumerate("ABCDE"))

    def _ftste_select(self, prompt: str, rep: int) -> str:
        tail = prompt.rsplit("Which of the following options is correct?", 1)[1]
        letters = []
        for line in tail.splitlines():
            m = re.match(r"^([A-F]): (\(.*\))$", line.strip())
            if m and self.believes(_triples_in(m.group(2))[0]):
                letters.append(m.group(1))
        return "".join(letters) or "none"


def scenario_provider(
    responses: dict[str, list[TripleTuple]],
    beliefs: Sequence[TripleTuple],
    samples: Optional[dict[str, list[str]]] = None,
) -> MockChatProvider:
    return MockChatProvider(
        responder=ScenarioResponder(responses, beliefs, samples or {}),
        default="",
        provider_id="mock-scenario",
    )


def load_scenario(path: Union[str, Path]) -> MockChatProvider:
    """Build a provider from ``{"responses": {...}, "beliefs": [...], "samples": {...}}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    responses = {k: [tuple(t) for t in v] for k, v in data.get("responses", {}).items()}
    beliefs = [tuple(t) for t in data.get("beliefs", [])]
    return scenario_provider(responses, beliefs, data.get("samples", {}))
