"""Prompt templates stored as text assets.

Slots are written ``{slot name}`` and filled by plain substitution, so the
templates may contain literal quotes and parentheses without escaping.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

NAMES = (
    "extraction",
    "verification",
    "question_generation",
    "question_answering",
    "relation_prediction",
    "consistency_comparison",
    "tail_replacement",
    "answer_selection",
)


@lru_cache(maxsize=None)
def template(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown prompt template {name!r}")
    text = resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


def render(name: str, **slots: str) -> str:
    """Fill a template. Keyword underscores stand for spaces in slot names."""
    text = template(name)
    mapping = {}
    for key, value in slots.items():
        token = "{" + key + "}"
        if token not in text:
            token = "{" + key.replace("_", " ") + "}"
        if token not in text:
            raise KeyError(f"template {name!r} has no slot {key!r}")
        mapping[token] = value
    # Single pass, so slot values that happen to contain "{...}" stay literal.
    pattern = re.compile("|".join(re.escape(t) for t in mapping))
    return pattern.sub(lambda m: mapping[m.group(0)], text) if mapping else text
