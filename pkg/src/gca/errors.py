from __future__ import annotations

from typing import Optional


class GcaError(Exception):
    """Base class for all detector errors."""


class RejectedInputError(GcaError, ValueError):
    pass


class ContractError(GcaError, ValueError):
    pass


class ParseError(GcaError, ValueError):
    def __init__(self, message: str, pos: Optional[int] = None, key: Optional[str] = None):
        self.pos = pos
        self.key = key
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


class ProviderError(GcaError):
    def __init__(self, message: str, stage: str = ""):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if stage else message)


class StorageError(GcaError, OSError):
    pass


class ExtractionEmptyError(GcaError):
    def __init__(self, raw_text: str):
        self.raw_text = raw_text
        super().__init__(f"no parseable triples in model output ({len(raw_text)} chars)")


class UndefinedStatsError(GcaError, ValueError):
    pass


class CorpusError(GcaError):
    pass


class CalibrationError(GcaError, ValueError):
    pass
