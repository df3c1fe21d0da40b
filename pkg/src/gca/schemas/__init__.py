"""JSON Schemas for files the CLI writes."""

from __future__ import annotations

import json
from importlib import resources


def report_schema() -> dict:
    return json.loads(resources.files(__name__).joinpath("report.schema.json").read_text(encoding="utf-8"))
