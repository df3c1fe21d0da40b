"""Reverse verification by triple reconstruction.

Three prompted tasks check whether the model can recover each part of a
triple when constrained by other high-confidence triples from the same
response:

* HEQA: generate a question whose answer is the head, then answer it
  repeatedly and count answers that match the head.
* RR: mask the relation, predict it repeatedly, and have the model judge
  each prediction against the original.
* FTSTE: generate five tail-swapped distractors, mix in the original and
  count how often repeated multiple-choice selections include it.
"""

from __future__ import annotations

import hashlib
import logging
import random
import re
import string
from enum import Enum
from typing import Optional, Sequence

from . import prompts
from .consistency import cosine
from .errors import ContractError, RejectedInputError
from .extraction import split_fields
from .gateway import ChatRequest, EmbeddingRequest, Gateway
from .serialize import register
from .types import Triple, canonicalize_entity, record

log = logging.getLogger(__name__)

LETTERS = "ABCDEF"
_OPTION_LINE = re.compile(r"^\s*([A-Ea-e])\s*[:.)]\s*\((?P<body>.*)\)\s*[.;,]?\s*$")
_PAREN = re.compile(r"\((?P<body>.*)\)", re.S)


class Task(str, Enum):
    HEQA = "heqa"
    RR = "rr"
    FTSTE = "ftste"


@register
@record
class FactContext:
    fact_triples: tuple[Triple, ...] = ()
    cap: int = 5

    def __post_init__(self):
        object.__setattr__(self, "fact_triples", tuple(self.fact_triples))
        if self.cap < 1:
            raise ContractError("fact context cap must be >= 1")

    def constraints_for(self, triple: Triple) -> tuple[Triple, ...]:
        """The fact set minus the triple under verification."""
        key = _key(triple)
        return tuple(t for t in self.fact_triples if _key(t) != key)


@register
@record
class TaskOutcome:
    task: Task
    trials: int
    matches: int
    score: Optional[float]
    skipped: bool = False
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if not 0 <= self.matches <= self.trials:
            raise ContractError(f"matches={self.matches} outside [0, trials={self.trials}]")
        if self.skipped:
            if self.score is not None:
                raise ContractError("a skipped task carries no score")
        elif self.score is None or not 0.0 <= self.score <= 1.0:
            raise ContractError(f"task score {self.score} outside [0, 1]")

    @classmethod
    def of(cls, task: Task, trials: int, matches: int, warnings=()) -> TaskOutcome:
        return cls(task, trials, matches, matches / trials, False, tuple(warnings))

    @classmethod
    def skip(cls, task: Task, reason: str) -> TaskOutcome:
        log.warning("%s skipped: %s", task.value, reason)
        return cls(task, 0, 0, None, True, (reason,))


def _key(t: Triple) -> tuple[str, str, str]:
    return (t.head, t.relation, t.tail)


def select_fact_context(
    triples: Sequence[Triple], c_norm: Sequence[float], cap: int = 5, min_score: float = 0.5
) -> FactContext:
    """Triples whose normalized consistency is >= min_score, best first, at most ``cap``."""
    if len(triples) != len(c_norm):
        raise ContractError("one consistency score per triple is required")
    ranked = sorted(
        (i for i in range(len(triples)) if c_norm[i] >= min_score),
        key=lambda i: (-c_norm[i], i),
    )
    return FactContext(tuple(triples[i] for i in ranked[:cap]), cap)


# ---------------------------------------------------------------------------
# Prompt builders
# ---------------------------------------------------------------------------


def heqa_question_prompt(triple: Triple, ctx: FactContext) -> str:
    facts = ctx.constraints_for(triple)
    lines = [f"Fact triples:{facts[0].as_text()}" if facts else "Fact triples:"]
    lines += [f"Triplet: {t.as_text()}" for t in facts[1:]]
    return prompts.render(
        "question_generation",
        fact_triples="\n".join(lines),
        verified_triple=f"Verification triple:{triple.as_text()}",
    )


def heqa_answer_prompt(question: str) -> str:
    return prompts.render("question_answering", Reconstructed_Question=question)


def rr_prediction_prompt(triple: Triple, ctx: FactContext) -> str:
    facts = ",".join(t.as_text() for t in ctx.constraints_for(triple))
    return prompts.render(
        "relation_prediction", fact_triples=facts, masked_triple=triple.with_relation("mask")
    )


def rr_judge_prompt(original: str, predicted: str) -> str:
    return prompts.render("consistency_comparison", triple1=original, triple2=predicted)


def ftste_replacement_prompt(triple: Triple) -> str:
    return prompts.render("tail_replacement", initial_triple=triple.as_text())


def ftste_selection_prompt(triple: Triple, ctx: FactContext, options: Sequence[str]) -> str:
    facts = ",".join(t.as_text() for t in ctx.constraints_for(triple))
    opts = "\n".join(f"{LETTERS[k]}: {o}" for k, o in enumerate(options))
    return prompts.render("answer_selection", fact_triples=facts, options=opts)


# ---------------------------------------------------------------------------
# Reply parsing
# ---------------------------------------------------------------------------


def _safe_canon(text: str) -> Optional[str]:
    try:
        return canonicalize_entity(text)
    except RejectedInputError:
        return None


def answer_matches_head(answer: str, head: str, gateway: Optional[Gateway], theta_h: float) -> bool:
    """Exact canonical match, then whole-word containment, then embedding cosine."""
    a, h = _safe_canon(answer), _safe_canon(head)
    if a is None or h is None:
        return False
    if a == h:
        return True
    if re.search(r"(?<!\w)" + re.escape(h) + r"(?!\w)", a):
        return True
    if gateway is None:
        return False
    va, vh = gateway.embed(EmbeddingRequest((a, h)))
    return cosine(va, vh) >= theta_h


def parse_yes_no(reply: str) -> Optional[bool]:
    words = reply.strip().lower().translate(str.maketrans("", "", string.punctuation)).split()
    if not words:
        return None
    if words[0] == "yes":
        return True
    if words[0] == "no":
        return False
    return None


def parse_predicted_triple(reply: str) -> str:
    m = _PAREN.search(reply)
    if m:
        fields = split_fields(m.group("body"))
        if len(fields) == 3 and all(fields):
            return f"({fields[0]}, {fields[1]}, {fields[2]})"
    return reply.strip()


def parse_distractors(reply: str) -> list[str]:
    out = []
    for line in reply.splitlines():
        m = _OPTION_LINE.match(line)
        if not m:
            continue
        fields = split_fields(m.group("body"))
        if len(fields) == 3 and all(fields):
            out.append(f"({fields[0]}, {fields[1]}, {fields[2]})")
    return out


def parse_letters(reply: str) -> tuple[set[str], list[str]]:
    """Option letters chosen in ``reply`` and any invalid uppercase tokens."""
    chosen, invalid = set(), []
    for token in re.findall(r"\b[A-Z]+\b", reply):
        if set(token) <= set(LETTERS):
            chosen.update(token)
        else:
            invalid.append(token)
    return chosen, invalid


def option_position(triple: Triple, seed: int = 0) -> int:
    digest = hashlib.sha256(f"{seed}\x00{triple.as_text()}".encode("utf-8")).digest()
    return random.Random(digest).randrange(len(LETTERS))


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def heqa(
    triple: Triple,
    ctx: FactContext,
    gateway: Gateway,
    n_answers: int = 5,
    theta_h: float = 0.90,
    answer_temperature: float = 1.0,
) -> TaskOutcome:
    question = gateway.chat(ChatRequest(heqa_question_prompt(triple, ctx), 0.0, tag="heqa-question")).strip()
    if not question:
        return TaskOutcome.skip(Task.HEQA, "question generation returned nothing")
    request = ChatRequest(heqa_answer_prompt(question), answer_temperature, tag="heqa-answer")
    hits = 0
    for k in range(n_answers):
        answer = gateway.chat(request, repetition=k)
        if answer_matches_head(answer, triple.head, gateway, theta_h):
            hits += 1
    return TaskOutcome.of(Task.HEQA, n_answers, hits)


def rr(
    triple: Triple,
    ctx: FactContext,
    gateway: Gateway,
    n_preds: int = 5,
    predict_temperature: float = 1.0,
) -> TaskOutcome:
    request = ChatRequest(rr_prediction_prompt(triple, ctx), predict_temperature, tag="rr-predict")
    hits, warnings = 0, []
    for k in range(n_preds):
        predicted = parse_predicted_triple(gateway.chat(request, repetition=k))
        if not predicted:
            warnings.append(f"empty relation prediction at trial {k}")
            continue
        verdict = parse_yes_no(
            gateway.chat(ChatRequest(rr_judge_prompt(triple.as_text(), predicted), 0.0, tag="rr-judge"))
        )
        if verdict is None:
            warnings.append(f"judge reply at trial {k} is neither yes nor no; counted as no")
            log.warning(warnings[-1])
        elif verdict:
            hits += 1
    return TaskOutcome.of(Task.RR, n_preds, hits, warnings)


def ftste(
    triple: Triple,
    ctx: FactContext,
    gateway: Gateway,
    n_selections: int = 5,
    seed: int = 0,
    select_temperature: float = 1.0,
    position: Optional[int] = None,
) -> TaskOutcome:
    reply = gateway.chat(ChatRequest(ftste_replacement_prompt(triple), 0.0, tag="ftste-replace"))
    original = triple.as_text()
    distractors = [d for d in parse_distractors(reply) if d != original]
    if not distractors:
        return TaskOutcome.skip(Task.FTSTE, "no parseable distractor triples")
    warnings = []
    if len(distractors) < 5:
        warnings.append(f"only {len(distractors)} distractors parsed; padding by repetition")
        distractors = [distractors[k % len(distractors)] for k in range(5)]
    pos = option_position(triple, seed) if position is None else position
    options = list(distractors[:5])
    options.insert(pos, original)
    target = LETTERS[pos]
    request = ChatRequest(ftste_selection_prompt(triple, ctx, options), select_temperature, tag="ftste-select")
    hits = 0
    for k in range(n_selections):
        chosen, invalid = parse_letters(gateway.chat(request, repetition=k))
        if invalid:
            warnings.append(f"invalid option letters {invalid} at trial {k}")
            log.warning(warnings[-1])
        if target in chosen:
            hits += 1
    return TaskOutcome.of(Task.FTSTE, n_selections, hits, warnings)
