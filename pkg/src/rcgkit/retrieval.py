"""Per-query knowledge selection: pick a knowledge base (manually or by
description similarity), retrieve top-k passages, and weight how much of the
retrieved text reaches the prompt.

Explicit prompt-weighting (EPW) keeps the first ceil(N * weight / 100) of the
N whitespace tokens in the rank-ordered concatenation, so lower-ranked
passages are dropped first.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embed import EmbedderSpec, cosine, embed_one
from .errors import RcgError
from .index import DEFAULT_EF_SEARCH, FlatIndex, HnswIndex
from .ingest import Passage

_TOKEN_RE = re.compile(r"\S+")

MODES = ("off", "manual", "mokb")


@dataclass
class KnowledgeBase:
    kb_id: str
    name: str
    description: str
    passages: list[Passage]
    index: FlatIndex | HnswIndex
    embedder: EmbedderSpec
    description_vec: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.index.count != len(self.passages):
            raise RcgError(
                f"kb {self.kb_id!r}: index has {self.index.count} rows "
                f"but passage store has {len(self.passages)} records"
            )
        if self.description_vec is None:
            self.description_vec = embed_one(self.embedder, self.description)
        self._by_id = {p.passage_id: p for p in self.passages}

    def passage(self, passage_id: str) -> Passage:
        return self._by_id[passage_id]


@dataclass(frozen=True)
class RetrievalConfig:
    mode: str = "manual"
    selected_kb: str | None = None
    k: int = 5
    epw_weight: int = 100
    ef_search: int = DEFAULT_EF_SEARCH

    def __post_init__(self):
        if self.mode not in MODES:
            raise RcgError(f"unknown retrieval mode {self.mode!r}")
        if self.mode == "manual" and not self.selected_kb:
            raise RcgError("manual mode requires selected_kb")
        if self.k < 1:
            raise RcgError(f"k must be >= 1, got {self.k}")
        if not 0 <= self.epw_weight <= 100:
            raise RcgError(f"epw_weight must be in [0, 100], got {self.epw_weight}")


@dataclass(frozen=True)
class RetrievedHit:
    passage_id: str
    score: float
    rank: int
    text: str


@dataclass(frozen=True)
class RetrievalResult:
    kb_id: str
    hits: list[RetrievedHit]
    knowledge_text: str
    tokens_retrieved: int
    tokens_injected: int


class KbRegistry:
    """Registration-ordered knowledge-base registry; reads are lock-free
    snapshots, mutations take the registry lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._kbs: dict[str, KnowledgeBase] = {}

    def register(self, kb: KnowledgeBase) -> None:
        with self._lock:
            if kb.kb_id in self._kbs:
                raise RcgError(f"kb {kb.kb_id!r} already registered")
            self._kbs[kb.kb_id] = kb

    def replace(self, kb: KnowledgeBase) -> None:
        with self._lock:
            self._kbs[kb.kb_id] = kb

    def remove(self, kb_id: str) -> None:
        with self._lock:
            del self._kbs[kb_id]

    def get(self, kb_id: str) -> KnowledgeBase:
        kb = self._kbs.get(kb_id)
        if kb is None:
            raise RcgError(f"unknown knowledge base {kb_id!r}")
        return kb

    def list(self) -> list[KnowledgeBase]:
        return list(self._kbs.values())

    def __len__(self) -> int:
        return len(self._kbs)


def select_kb(query: str, kbs: Sequence[KnowledgeBase], cfg: RetrievalConfig) -> str | None:
    """Resolve which knowledge base serves this query.

    manual -> cfg.selected_kb; mokb -> the KB whose functional-description
    embedding is most cosine-similar to the query embedding, ties broken by
    registration order; off -> None.
    """
    if cfg.mode == "off":
        return None
    if not kbs:
        raise RcgError("no knowledge bases registered")
    if cfg.mode == "manual":
        ids = [kb.kb_id for kb in kbs]
        if cfg.selected_kb not in ids:
            raise RcgError(f"unknown knowledge base {cfg.selected_kb!r} (have {ids})")
        return cfg.selected_kb

    for kb in kbs:
        if not kb.description.strip():
            raise RcgError(f"mokb mode requires a description for kb {kb.kb_id!r}")
    best_id = None
    best_score = -np.inf
    query_vecs: dict[EmbedderSpec, np.ndarray] = {}
    for kb in kbs:
        qv = query_vecs.get(kb.embedder)
        if qv is None:
            qv = embed_one(kb.embedder, query)
            query_vecs[kb.embedder] = qv
        score = cosine(qv, kb.description_vec)
        if score > best_score:
            best_score = score
            best_id = kb.kb_id
    return best_id


def apply_epw(passage_texts: Sequence[str], weight_percent: int) -> str:
    """Join passages by newline, then keep the leading ceil(N*w/100) tokens.

    Rejoining uses a newline wherever the original gap contained one, a single
    space otherwise; weight 100 returns the join untouched.
    """
    if not 0 <= weight_percent <= 100:
        raise RcgError(f"weight_percent must be in [0, 100], got {weight_percent}")
    joined = "\n".join(passage_texts)
    if weight_percent == 100:
        return joined
    if weight_percent == 0:
        return ""
    matches = list(_TOKEN_RE.finditer(joined))
    n = len(matches)
    if n == 0:
        return ""
    keep = (n * weight_percent + 99) // 100  # ceil without float rounding
    parts = [matches[0].group(0)]
    for prev, cur in zip(matches, matches[1:keep]):
        gap = joined[prev.end() : cur.start()]
        parts.append("\n" if "\n" in gap else " ")
        parts.append(cur.group(0))
    return "".join(parts)


def retrieve(query: str, kb: KnowledgeBase, cfg: RetrievalConfig) -> RetrievalResult:
    """Top-k search over the KB plus EPW weighting of the joined passage text."""
    if cfg.mode == "off":
        raise RcgError("retrieve called with retrieval mode off")
    if kb.index.count == 0:
        return RetrievalResult(kb.kb_id, [], "", 0, 0)
    qv = embed_one(kb.embedder, query)
    if isinstance(kb.index, HnswIndex):
        raw = kb.index.search(qv, cfg.k, ef_search=max(cfg.ef_search, cfg.k))
    else:
        raw = kb.index.search(qv, cfg.k)
    hits = [
        RetrievedHit(h.passage_id, h.score, h.rank, kb.passage(h.passage_id).text) for h in raw
    ]
    texts = [h.text for h in hits]
    knowledge_text = apply_epw(texts, cfg.epw_weight)
    tokens_retrieved = len("\n".join(texts).split())
    tokens_injected = len(knowledge_text.split())
    return RetrievalResult(kb.kb_id, hits, knowledge_text, tokens_retrieved, tokens_injected)
