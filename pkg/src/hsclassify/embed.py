"""Text-to-vector interface with a deterministic baseline embedder.

Two interchangeable embedders sit behind one contract: a hashed n-gram
embedder that runs in-process (word unigrams/bigrams plus character trigrams,
signed feature hashing, L2 normalization) and a thin client for an external
sentence-encoder service speaking ``POST /embed``.  The baseline is fully
deterministic: bucket and sign come from keyed blake2b digests of the n-gram
text, so vectors depend only on (text, config) and never on process state.

The hashing helpers are exported so tests can rebuild vectors from first
principles instead of trusting the embedder with its own verification.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass

import numpy as np
import requests

from .errors import HsClassifyError


class EmptyEmbeddingError(HsClassifyError):
    code = "EmptyEmbedding"


class ServiceUnavailableError(HsClassifyError):
    code = "ServiceUnavailable"


class DimensionMismatchError(HsClassifyError):
    code = "DimensionMismatch"


class ZeroVectorError(HsClassifyError):
    code = "ZeroVector"


# ---------------------------------------------------------------------------
# Configuration and embedding value type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "HashedNgram"
    dimension: int = 256
    word_ngrams: tuple[int, ...] = (1, 2)
    char_ngrams: tuple[int, ...] = (3,)
    endpoint: str | None = None
    timeout: float = 5.0
    max_retries: int = 2
    max_concurrency: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("HashedNgram", "RemoteService"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dimension < 8:
            raise ValueError("dimension must be at least 8")
        if self.kind == "HashedNgram" and not (self.word_ngrams or self.char_ngrams):
            raise ValueError("HashedNgram needs at least one n-gram order")
        if self.kind == "RemoteService" and not self.endpoint:
            raise ValueError("RemoteService needs an endpoint")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dimension": self.dimension,
            "word_ngrams": list(self.word_ngrams),
            "char_ngrams": list(self.char_ngrams),
            "endpoint": self.endpoint,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "max_concurrency": self.max_concurrency,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EmbedderConfig":
        data = dict(data)
        data["word_ngrams"] = tuple(data.get("word_ngrams", (1, 2)))
        data["char_ngrams"] = tuple(data.get("char_ngrams", (3,)))
        return cls(**data)

    def fingerprint(self) -> str:
        """Stable digest of the config; stored with persisted vectors."""
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Embedding:
    """A fixed-dimension real vector with its Euclidean norm cached."""

    __slots__ = ("values", "norm")

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 1:
            raise DimensionMismatchError("embedding must be a 1-d vector")
        if not np.all(np.isfinite(self.values)):
            raise DimensionMismatchError("embedding contains non-finite entries")
        self.norm = float(np.linalg.norm(self.values))

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    @property
    def is_zero(self) -> bool:
        return self.norm == 0.0


def cosine(a: Embedding, b: Embedding) -> float:
    if a.dimension != b.dimension:
        raise DimensionMismatchError(
            f"cosine over dimensions {a.dimension} and {b.dimension}"
        )
    if a.is_zero or b.is_zero:
        raise ZeroVectorError("cosine is undefined for a zero vector")
    return float(np.dot(a.values, b.values) / (a.norm * b.norm))


# ---------------------------------------------------------------------------
# Hashed n-gram baseline
# ---------------------------------------------------------------------------


def _tokens(text) -> list[str]:
    if isinstance(text, str):
        return text.split()
    return list(text)


def extract_features(text, config: EmbedderConfig) -> list[str]:
    """All n-gram features of a text, tagged by kind and order."""
    tokens = _tokens(text)
    feats: list[str] = []
    for n in config.word_ngrams:
        feats.extend(
            f"w{n}:" + " ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
        )
    joined = " ".join(tokens)
    for n in config.char_ngrams:
        feats.extend(f"c{n}:" + joined[i : i + n] for i in range(len(joined) - n + 1))
    return feats


def _digest(feature: str, seed: int, person: bytes) -> int:
    h = hashlib.blake2b(
        feature.encode("utf-8"),
        digest_size=8,
        key=str(seed).encode("ascii"),
        person=person,
    )
    return int.from_bytes(h.digest(), "big")


def feature_bucket(feature: str, config: EmbedderConfig) -> int:
    return _digest(feature, config.seed, b"bucket") % config.dimension


def feature_sign(feature: str, config: EmbedderConfig) -> int:
    return 1 if _digest(feature, config.seed, b"sign") & 1 else -1


class HashedNgramEmbedder:
    """Deterministic signed-hashing embedder over word and char n-grams."""

    def __init__(self, config: EmbedderConfig | None = None):
        self.config = config or EmbedderConfig()
        if self.config.kind != "HashedNgram":
            raise ValueError("config is not for HashedNgram")

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def embed(self, text) -> Embedding:
        feats = extract_features(text, self.config)
        if not feats:
            raise EmptyEmbeddingError("no n-grams extracted from text")
        acc = np.zeros(self.config.dimension, dtype=np.float64)
        for feat in feats:
            acc[feature_bucket(feat, self.config)] += feature_sign(feat, self.config)
        norm = np.linalg.norm(acc)
        if norm > 0:
            acc /= norm
        # exact sign cancellation leaves a flagged zero vector
        return Embedding(acc)

    def embed_batch(self, texts) -> list[Embedding]:
        return [self.embed(t) for t in texts]


# ---------------------------------------------------------------------------
# Remote sentence-encoder client
# ---------------------------------------------------------------------------


class RemoteServiceEmbedder:
    """Client for an external encoder speaking the ``POST /embed`` protocol.

    Bounds in-flight requests with a semaphore and retries transport
    failures; payload shape problems are reported as DimensionMismatch
    because retrying cannot fix a wrong model on the other side.
    """

    def __init__(self, config: EmbedderConfig, session: requests.Session | None = None):
        if config.kind != "RemoteService":
            raise ValueError("config is not for RemoteService")
        self.config = config
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(config.max_concurrency)

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def embed(self, text) -> Embedding:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts) -> list[Embedding]:
        payloads = [" ".join(_tokens(t)) for t in texts]
        if any(not p for p in payloads):
            raise EmptyEmbeddingError("cannot embed an empty text")
        url = self.config.endpoint.rstrip("/") + "/embed"
        body = {"texts": payloads}
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                with self._gate:
                    resp = self._session.post(url, json=body, timeout=self.config.timeout)
                if resp.status_code // 100 != 2:
                    last_error = ServiceUnavailableError(
                        f"encoder returned HTTP {resp.status_code}"
                    )
                    continue
                vectors = resp.json().get("vectors")
                return self._parse(vectors, expected=len(payloads))
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
        raise ServiceUnavailableError(
            f"encoder unreachable after {self.config.max_retries + 1} attempts: {last_error}"
        )

    def _parse(self, vectors, expected: int) -> list[Embedding]:
        if not isinstance(vectors, list) or len(vectors) != expected:
            raise DimensionMismatchError("encoder returned a wrong number of vectors")
        out: list[Embedding] = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] != self.config.dimension:
                raise DimensionMismatchError(
                    f"encoder returned length {arr.shape}, expected {self.config.dimension}"
                )
            norm = np.linalg.norm(arr)
            if norm > 0:
                arr = arr / norm
            out.append(Embedding(arr))
        return out


def make_embedder(config: EmbedderConfig):
    if config.kind == "HashedNgram":
        return HashedNgramEmbedder(config)
    return RemoteServiceEmbedder(config)
