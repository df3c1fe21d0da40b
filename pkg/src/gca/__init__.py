"""Graph-based, context-aware hallucination detection for long-form LLM responses."""

__version__ = "0.1.0"

from .errors import GcaError
from .gateway import Gateway, MockChatProvider, MockEmbeddingProvider, TranscriptCache
from .pipeline import Detector
from .types import DetectorConfig, SampleSet, Triple, TripleScoreCard, Verdict

__all__ = [
    "Detector",
    "DetectorConfig",
    "Gateway",
    "GcaError",
    "MockChatProvider",
    "MockEmbeddingProvider",
    "SampleSet",
    "TranscriptCache",
    "Triple",
    "TripleScoreCard",
    "Verdict",
]
