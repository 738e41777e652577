"""Text embeddings: a remote HTTP embedder for real use and a deterministic
hash-based embedder for offline, oracle-verifiable tests.

All vectors are float32 and (by default) L2-normalized, so cosine similarity
reduces to a dot product everywhere downstream.
"""

from __future__ import annotations

import os
import time
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import requests

from .errors import ConfigError, UpstreamError

TEST_EMBED_DIM = 64
_TRIGRAM_WEIGHT = 0.3  # total trigram mass per token, small vs the 1.0 token bucket

AUTH_TOKEN_ENV = "RCGKIT_EMBED_TOKEN"


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "test"  # "test" | "remote"
    model_name: str = "test-embedder"
    dim: int = TEST_EMBED_DIM
    normalize: bool = True
    endpoint_url: str | None = None
    batch_size: int = 32
    max_retries: int = 3
    timeout_s: float = 30.0

    def __post_init__(self):
        if self.kind not in ("test", "remote"):
            raise ConfigError(f"unknown embedder kind {self.kind!r}")
        if self.dim <= 0:
            raise ConfigError(f"embedder dim must be positive, got {self.dim}")
        if self.kind == "remote" and not self.endpoint_url:
            raise ConfigError("remote embedder requires endpoint_url")


@dataclass
class EmbeddingMatrix:
    dim: int
    vectors: np.ndarray  # (count, dim) float32
    ids: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; all-zero vectors compare as 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _bucket(data: bytes, dim: int) -> int:
    return zlib.crc32(data) % dim


def test_embed(text: str, dim: int = TEST_EMBED_DIM) -> np.ndarray:
    """Deterministic embedding: whitespace tokens hash into buckets (weight 1
    each), plus a small character-trigram signal per token, L2-normalized.

    Texts sharing tokens score high; texts sharing only substrings score a
    little above unrelated ones. Empty text maps to the unit vector e0.
    """
    vec = np.zeros(dim, dtype=np.float64)
    tokens = text.split()
    if not tokens:
        vec[0] = 1.0
        return vec.astype(np.float32)
    for tok in tokens:
        data = tok.encode("utf-8")
        vec[_bucket(b"t:" + data, dim)] += 1.0
        trigrams = [data[i : i + 3] for i in range(len(data) - 2)]
        if trigrams:
            w = _TRIGRAM_WEIGHT / len(trigrams)
            for tri in trigrams:
                vec[_bucket(b"g:" + tri, dim)] += w
    vec /= np.linalg.norm(vec)
    return vec.astype(np.float32)


def _remote_embed_batch(spec: EmbedderSpec, texts: Sequence[str]) -> np.ndarray:
    payload = {"model": spec.model_name, "input": list(texts)}
    headers = {}
    token = os.environ.get(AUTH_TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    last_exc: Exception | None = None
    for attempt in range(1, spec.max_retries + 1):
        try:
            resp = requests.post(
                spec.endpoint_url, json=payload, headers=headers, timeout=spec.timeout_s
            )
            resp.raise_for_status()
            body = resp.json()
            rows = sorted(body["data"], key=lambda d: d["index"])
            out = np.array([r["embedding"] for r in rows], dtype=np.float32)
            if out.shape != (len(texts), spec.dim):
                raise ConfigError(
                    f"embedding endpoint returned shape {out.shape}, "
                    f"expected ({len(texts)}, {spec.dim})"
                )
            return out
        except ConfigError:
            raise
        except (requests.RequestException, KeyError, ValueError, TypeError) as exc:
            last_exc = exc
            if attempt < spec.max_retries:
                time.sleep(0.2 * (2 ** (attempt - 1)))
    raise UpstreamError(
        f"embedding endpoint failed after {spec.max_retries} attempts: {last_exc}",
        attempts=spec.max_retries,
    )


def embed_texts(spec: EmbedderSpec, texts: Sequence[str]) -> EmbeddingMatrix:
    """Embed texts in order, batching internally so long lists stream.

    Rows are renormalized when spec.normalize is set; the remote wire shape is
    POST {model, input: [str]} -> {data: [{index, embedding: [float]}]}.
    """
    texts = list(texts)
    chunks: list[np.ndarray] = []
    for start in range(0, len(texts), spec.batch_size):
        batch = texts[start : start + spec.batch_size]
        if spec.kind == "test":
            rows = np.stack([test_embed(t, spec.dim) for t in batch])
        else:
            rows = _remote_embed_batch(spec, batch)
        chunks.append(rows)
    if chunks:
        vectors = np.concatenate(chunks, axis=0).astype(np.float32)
    else:
        vectors = np.zeros((0, spec.dim), dtype=np.float32)
    if spec.normalize and vectors.shape[0]:
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        safe = np.where(norms == 0.0, 1.0, norms)
        vectors = (vectors / safe).astype(np.float32)
    return EmbeddingMatrix(dim=spec.dim, vectors=vectors)


def embed_one(spec: EmbedderSpec, text: str) -> np.ndarray:
    return embed_texts(spec, [text]).vectors[0]
