from __future__ import annotations

import pytest

from gca.gateway import Gateway, MockChatProvider, MockEmbeddingProvider, TranscriptCache
from gca.scenario import scenario_provider

import helpers


@pytest.fixture
def make_gateway(tmp_path):
    """Gateway over a mock chat provider; pass ``cache=True`` for an on-disk cache."""

    def build(chat=None, cache=False, **mock_kwargs):
        chat = chat or MockChatProvider(**mock_kwargs)
        tc = TranscriptCache(tmp_path / "cache") if cache else None
        return Gateway(chat, MockEmbeddingProvider(), tc, sleep=lambda s: None)

    return build


@pytest.fixture
def scenario_gateway(make_gateway):
    data = helpers.scenario_data()
    provider = scenario_provider(
        {k: [tuple(t) for t in v] for k, v in data["responses"].items()},
        [tuple(t) for t in data["beliefs"]],
        data["samples"],
    )
    return make_gateway(provider)


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; call with (name, passed, detail)."""

    def record(name: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        print(line)
        ACCEPTANCE.append((name, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
