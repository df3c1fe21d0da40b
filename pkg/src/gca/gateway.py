"""Single access point for chat and embedding providers.

Every prompted step goes through :class:`Gateway`, which keys a transcript
cache by (prompt, temperature, repetition) so that a warm cache replays a
run without any provider traffic. Embeddings are L2-normalized here, so
cosine similarity downstream is a plain dot product.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np

from .errors import ProviderError, RejectedInputError, StorageError
from .serialize import deserialize, format_float, register, serialize
from .types import record

log = logging.getLogger(__name__)

DEFAULT_API_BASE = "https://api.openai.com/v1"
DEFAULT_CHAT_MODEL = "gpt-4-1106-preview"
DEFAULT_SAMPLE_MODEL = "gpt-3.5-turbo"
DEFAULT_EMBED_MODEL = "text-embedding-3-small"
MOCK_EMBED_DIM = 256


@register
@record
class ChatRequest:
    prompt: str
    temperature: float = 0.0
    max_output: int = 1024
    tag: str = ""

    def __post_init__(self):
        if not self.prompt or not self.prompt.strip():
            raise RejectedInputError("chat prompt is empty")
        if self.temperature < 0:
            raise RejectedInputError("temperature must be >= 0")


@register
@record
class TranscriptEntry:
    request_digest: str
    response: str
    provider_id: str
    timestamp: str


@register
@record
class EmbeddingRequest:
    texts: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "texts", tuple(self.texts))
        if not self.texts:
            raise RejectedInputError("embedding request has no texts")
        if any(not t or not t.strip() for t in self.texts):
            raise RejectedInputError("embedding request contains an empty text")


def request_digest(prompt: str, temperature: float, repetition: int) -> str:
    payload = json.dumps([prompt, format_float(temperature), int(repetition)], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def digest_of(request: ChatRequest, repetition: int = 0) -> str:
    return request_digest(request.prompt, request.temperature, repetition)


class TransientProviderError(ProviderError):
    """A failure worth retrying (network error, 5xx, rate limit)."""


class ChatProvider(Protocol):
    provider_id: str

    def complete(self, request: ChatRequest, repetition: int) -> str: ...


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


# ---------------------------------------------------------------------------
# Transcript cache
# ---------------------------------------------------------------------------


class TranscriptCache:
    """One JSON file per transcript entry, named by request digest.

    Writes go to a temp file and are renamed into place, so concurrent
    writers never expose a partial entry. The cache is append-only.
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._lock = threading.Lock()
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / "embeddings").mkdir(exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create cache at {self.root}: {exc}") from exc

    def _path(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, digest: str) -> Optional[TranscriptEntry]:
        path = self._path(digest)
        if not path.exists():
            return None
        return deserialize(path.read_text(encoding="utf-8"), TranscriptEntry)

    def put(self, entry: TranscriptEntry) -> None:
        with self._lock:
            existing = self.get(entry.request_digest)
            if existing is not None:
                if existing.response != entry.response:
                    raise StorageError(
                        f"digest {entry.request_digest[:12]} already maps to a different response"
                    )
                return
            self._atomic_write(self._path(entry.request_digest), serialize(entry) + "\n")

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.json"))

    def get_vector(self, key: str) -> Optional[list[float]]:
        path = self.root / "embeddings" / f"{key}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put_vector(self, key: str, vector: Sequence[float]) -> None:
        from .serialize import dumps

        path = self.root / "embeddings" / f"{key}.json"
        if path.exists():
            return
        self._atomic_write(path, dumps([float(x) for x in vector]) + "\n")

    def _atomic_write(self, path: Path, text: str) -> None:
        try:
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"cache write failed for {path.name}: {exc}") from exc


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


class Gateway:
    """Routes chat and embedding calls through cache, retry and a concurrency bound.

    ``sampler`` serves requests tagged ``"sample"`` (response generation);
    every other stage uses ``chat``. When ``sampler`` is None both slots share
    one provider.
    """

    def __init__(
        self,
        chat: ChatProvider,
        embedder: EmbeddingProvider,
        cache: Optional[TranscriptCache] = None,
        sampler: Optional[ChatProvider] = None,
        max_concurrency: int = 4,
        retries: int = 3,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.chat_provider = chat
        self.sample_provider = sampler or chat
        self.embedder = embedder
        self.cache = cache
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._count_lock = threading.Lock()
        self.provider_calls = 0
        self.embed_calls = 0

    def chat(self, request: ChatRequest, repetition: int = 0) -> str:
        if repetition < 0:
            raise RejectedInputError("repetition must be >= 0")
        digest = digest_of(request, repetition)
        if self.cache is not None:
            hit = self.cache.get(digest)
            if hit is not None:
                return hit.response
        provider = self.sample_provider if request.tag == "sample" else self.chat_provider
        text = self._with_retry(lambda: provider.complete(request, repetition), request.tag)
        with self._count_lock:
            self.provider_calls += 1
        if self.cache is not None:
            self.cache.put(
                TranscriptEntry(
                    request_digest=digest,
                    response=text,
                    provider_id=provider.provider_id,
                    timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                )
            )
        return text

    def embed(self, request: EmbeddingRequest) -> list[np.ndarray]:
        texts = list(request.texts)
        pid = self.embedder.provider_id
        keys = [hashlib.sha256(f"{pid}\x00{t}".encode("utf-8")).hexdigest() for t in texts]
        found: dict[str, list[float]] = {}
        if self.cache is not None:
            for k in keys:
                v = self.cache.get_vector(k)
                if v is not None:
                    found[k] = v
        missing = list(dict.fromkeys(t for t, k in zip(texts, keys) if k not in found))
        if missing:
            vectors = self._with_retry(lambda: self.embedder.embed(missing), "embed")
            if len(vectors) != len(missing):
                raise ProviderError(f"embedder returned {len(vectors)} vectors for {len(missing)} texts", "embed")
            with self._count_lock:
                self.embed_calls += 1
            for t, v in zip(missing, vectors):
                k = hashlib.sha256(f"{pid}\x00{t}".encode("utf-8")).hexdigest()
                found[k] = list(map(float, v))
                if self.cache is not None:
                    self.cache.put_vector(k, found[k])
        out = [np.asarray(found[k], dtype=np.float64) for k in keys]
        dims = {v.shape for v in out}
        if len(dims) != 1 or out[0].ndim != 1:
            raise ProviderError(f"embedding dimension mismatch in batch: {sorted(dims)}", "embed")
        normed = []
        for t, v in zip(texts, out):
            norm = float(np.linalg.norm(v))
            if not np.all(np.isfinite(v)) or norm == 0.0:
                raise ProviderError(f"degenerate embedding for {t[:40]!r}", "embed")
            normed.append(v / norm)
        return normed

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed(EmbeddingRequest((text,)))[0]

    def _with_retry(self, call, stage: str):
        last: Optional[Exception] = None
        for attempt in range(self.retries):
            try:
                with self._slots:
                    return call()
            except TransientProviderError as exc:
                last = exc
                log.warning("provider attempt %d/%d failed [%s]: %s", attempt + 1, self.retries, stage, exc)
                if attempt + 1 < self.retries:
                    self._sleep(self.backoff * (2 ** attempt))
        raise ProviderError(f"gave up after {self.retries} attempts: {last}", stage)


# ---------------------------------------------------------------------------
# OpenAI-compatible HTTP providers
# ---------------------------------------------------------------------------


def _env(name: str, default: Optional[str] = None) -> Optional[str]:
    value = os.environ.get(name, "").strip()
    return value or default


class OpenAIChatProvider:
    def __init__(self, model: Optional[str] = None, api_base: Optional[str] = None,
                 api_key: Optional[str] = None, timeout: float = 60.0, client=None):
        import httpx

        self.model = model or _env("GCA_CHAT_MODEL", DEFAULT_CHAT_MODEL)
        self.api_base = (api_base or _env("GCA_API_BASE", DEFAULT_API_BASE)).rstrip("/")
        self.api_key = api_key if api_key is not None else _env("GCA_API_KEY", "")
        self.client = client or httpx.Client(timeout=timeout)
        self.provider_id = f"openai:{self.model}"

    def complete(self, request: ChatRequest, repetition: int) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        data = _post_json(self.client, f"{self.api_base}/chat/completions", body, self.api_key, request.tag)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected chat payload: {exc}", request.tag) from exc


class OpenAIEmbeddingProvider:
    def __init__(self, model: Optional[str] = None, api_base: Optional[str] = None,
                 api_key: Optional[str] = None, timeout: float = 60.0, client=None):
        import httpx

        self.model = model or _env("GCA_EMBED_MODEL", DEFAULT_EMBED_MODEL)
        self.api_base = (api_base or _env("GCA_API_BASE", DEFAULT_API_BASE)).rstrip("/")
        self.api_key = api_key if api_key is not None else _env("GCA_API_KEY", "")
        self.client = client or httpx.Client(timeout=timeout)
        self.provider_id = f"openai:{self.model}"

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        body = {"model": self.model, "input": list(texts)}
        data = _post_json(self.client, f"{self.api_base}/embeddings", body, self.api_key, "embed")
        try:
            rows = sorted(data["data"], key=lambda r: r.get("index", 0))
            return [r["embedding"] for r in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"unexpected embedding payload: {exc}", "embed") from exc


def _post_json(client, url: str, body: dict, api_key: str, stage: str) -> dict:
    import httpx

    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    try:
        resp = client.post(url, json=body, headers=headers)
    except httpx.TransportError as exc:
        raise TransientProviderError(f"transport error: {exc}", stage) from exc
    if resp.status_code == 429 or resp.status_code >= 500:
        raise TransientProviderError(f"HTTP {resp.status_code}", stage)
    if resp.status_code >= 400:
        raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}", stage)
    try:
        return resp.json()
    except ValueError as exc:
        raise ProviderError("response is not JSON", stage) from exc


# ---------------------------------------------------------------------------
# Deterministic mocks
# ---------------------------------------------------------------------------


def mock_embed(text: str, d: int = MOCK_EMBED_DIM, seed: int = 0) -> np.ndarray:
    """Hashed bag of character 3-grams with seeded signs, L2-normalized.

    The text is lowercased and padded with one space on each side so that
    one- and two-character strings still yield grams.
    """
    if not text or not text.strip():
        raise RejectedInputError("cannot embed empty text")
    padded = f" {' '.join(text.lower().split())} "
    vec = np.zeros(d, dtype=np.float64)
    key = seed.to_bytes(8, "little", signed=False)
    for i in range(len(padded) - 2):
        h = hashlib.blake2b(padded[i:i + 3].encode("utf-8"), digest_size=8, key=key).digest()
        value = int.from_bytes(h, "little")
        sign = 1.0 if (value >> 63) & 1 else -1.0
        vec[value % d] += sign
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        # Colliding grams with opposite signs cancelled out; fall back to unsigned counts.
        for i in range(len(padded) - 2):
            h = hashlib.blake2b(padded[i:i + 3].encode("utf-8"), digest_size=8, key=key).digest()
            vec[int.from_bytes(h, "little") % d] += 1.0
        norm = np.linalg.norm(vec)
    return vec / norm


class MockEmbeddingProvider:
    def __init__(self, d: int = MOCK_EMBED_DIM, seed: int = 0):
        self.d = d
        self.seed = seed
        self.provider_id = f"mock-embed:{d}:{seed}"
        self.calls = 0

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        self.calls += 1
        return [mock_embed(t, self.d, self.seed).tolist() for t in texts]


@dataclass
class MockRule:
    """Scripted reply for prompts matching ``tag`` and containing ``contains``.

    A list-valued ``response`` is indexed by repetition (cyclically), which
    scripts a different answer for each repeated stochastic call.
    """

    response: Union[str, list[str]]
    tag: Optional[str] = None
    contains: Optional[str] = None

    def matches(self, request: ChatRequest) -> bool:
        if self.tag is not None and self.tag != request.tag:
            return False
        return self.contains is None or self.contains in request.prompt

    def reply(self, repetition: int) -> str:
        if isinstance(self.response, list):
            return self.response[repetition % len(self.response)]
        return self.response


class MockChatProvider:
    """Offline chat provider answering from a script.

    Lookup order: exact digest in ``script``, then ``responder``, then the
    first matching rule, then ``default``.
    """

    def __init__(
        self,
        script: Optional[dict[str, str]] = None,
        rules: Sequence[MockRule] = (),
        default: Optional[str] = None,
        responder: Optional[Callable[[ChatRequest, int], Optional[str]]] = None,
        provider_id: str = "mock-chat",
    ):
        self.script = dict(script or {})
        self.rules = list(rules)
        self.default = default
        self.responder = responder
        self.provider_id = provider_id
        self.calls: list[tuple[ChatRequest, int]] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest, repetition: int) -> str:
        with self._lock:
            self.calls.append((request, repetition))
        digest = digest_of(request, repetition)
        if digest in self.script:
            return self.script[digest]
        if self.responder is not None:
            text = self.responder(request, repetition)
            if text is not None:
                return text
        for rule in self.rules:
            if rule.matches(request):
                return rule.reply(repetition)
        if self.default is not None:
            return self.default
        raise ProviderError(f"no scripted response for digest {digest[:12]}", request.tag)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> MockChatProvider:
        """Load ``{"script": {...}, "rules": [...], "default": ...}`` from JSON."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [MockRule(**r) for r in data.get("rules", [])]
        return cls(script=data.get("script"), rules=rules, default=data.get("default"),
                   provider_id=data.get("provider_id", "mock-chat"))

