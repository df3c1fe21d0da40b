"""Triple-oriented response segmentation: prompted extraction, then one
prompted verification/correction pass."""

from __future__ import annotations

import logging
import re
from typing import Sequence

from . import prompts
from .errors import ExtractionEmptyError, RejectedInputError
from .gateway import ChatRequest, Gateway
from .serialize import register
from .types import Triple, record

log = logging.getLogger(__name__)

_TRIPLE_LINE = re.compile(
    r"^\s*(?:[-*•]\s*|\d+[.)]\s*)?triple\s*:\s*\((?P<body>.*)\)\s*[.;,]?\s*$",
    re.IGNORECASE,
)
_QUOTES = {'"': '"', "“": "”"}


@register
@record
class ExtractionOutcome:
    triples: tuple[Triple, ...]
    raw_model_text: str
    corrected: tuple[bool, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))
        object.__setattr__(self, "corrected", tuple(self.corrected) or (False,) * len(self.triples))
        object.__setattr__(self, "warnings", tuple(self.warnings))


def split_fields(body: str) -> list[str]:
    """Split on commas outside double quotes and outside nested parentheses."""
    honour_quotes = body.count('"') % 2 == 0
    fields, buf = [], []
    depth, in_quote = 0, False
    for ch in body:
        if honour_quotes and ch == '"':
            in_quote = not in_quote
        elif ch in "“”":
            in_quote = ch == "“"
        elif not in_quote and ch == "(":
            depth += 1
        elif not in_quote and ch == ")" and depth:
            depth -= 1
        elif ch == "," and not in_quote and depth == 0:
            fields.append("".join(buf))
            buf = []
            continue
        buf.append(ch)
    fields.append("".join(buf))
    return [_unquote(f.strip()) for f in fields]


def _unquote(text: str) -> str:
    if len(text) >= 2 and text[0] in _QUOTES and text[-1] == _QUOTES[text[0]]:
        return text[1:-1].strip()
    return text


def _parse(text: str, source: str) -> tuple[list[Triple], list[str]]:
    triples: list[Triple] = []
    rejected: list[str] = []
    for line in text.splitlines():
        m = _TRIPLE_LINE.match(line)
        if not m:
            continue
        fields = split_fields(m.group("body"))
        if len(fields) != 3 or not all(fields):
            rejected.append(line.strip())
            continue
        try:
            triples.append(Triple(*fields, source_response=source, ordinal=len(triples)))
        except RejectedInputError:
            rejected.append(line.strip())
    return triples, rejected


def parse_triple_lines(text: str, source: str = "original") -> list[Triple]:
    """Parse every ``Triple: (head, relation, tail)`` line; other lines are skipped."""
    return _parse(text or "", source)[0]


def format_triples(triples: Sequence[Triple]) -> str:
    return "\n".join(f"Triple: {t.as_text()}" for t in triples)


def extract_triples(
    response: str, gateway: Gateway, source: str = "original", temperature: float = 0.0
) -> ExtractionOutcome:
    if not response or not response.strip():
        raise RejectedInputError("response is empty")
    prompt = prompts.render("extraction", verified_response=response)
    raw = gateway.chat(ChatRequest(prompt, temperature=temperature, tag="extract"))
    triples, rejected = _parse(raw, source)
    warnings = [f"dropped malformed triple line: {line}" for line in rejected]
    for w in warnings:
        log.warning(w)
    if not triples:
        raise ExtractionEmptyError(raw)
    return ExtractionOutcome(tuple(triples), raw, warnings=tuple(warnings))


def verify_triples(
    response: str,
    triples: Sequence[Triple],
    gateway: Gateway,
    source: str = "original",
    temperature: float = 0.0,
) -> ExtractionOutcome:
    """Ask the model to correct ``triples`` against ``response``.

    An unparseable reply keeps the input list and records a warning.
    """
    if not triples:
        raise RejectedInputError("nothing to verify")
    prompt = prompts.render("verification", verified_response=response, triples=format_triples(triples))
    raw = gateway.chat(ChatRequest(prompt, temperature=temperature, tag="verify"))
    fixed, rejected = _parse(raw, source)
    warnings = [f"dropped malformed triple line: {line}" for line in rejected]
    if not fixed:
        warnings.append("verification reply had no parseable triples; keeping extracted triples")
        log.warning(warnings[-1])
        return ExtractionOutcome(tuple(triples), raw, (False,) * len(triples), tuple(warnings))
    before = {(t.head, t.relation, t.tail) for t in triples}
    corrected = tuple((t.head, t.relation, t.tail) not in before for t in fixed)
    return ExtractionOutcome(tuple(fixed), raw, corrected, tuple(warnings))


def extract_and_verify(
    response: str, gateway: Gateway, source: str = "original", temperature: float = 0.0
) -> ExtractionOutcome:
    first = extract_triples(response, gateway, source, temperature)
    second = verify_triples(response, first.triples, gateway, source, temperature)
    return ExtractionOutcome(
        second.triples, second.raw_model_text, second.corrected, first.warnings + second.warnings
    )
