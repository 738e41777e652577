"""Retrieval diagnostics and evaluation: sentence- and token-level similarity
scores, per-turn logging, and the Rouge-L accuracy/latency harness with its
prompt-weighting ablation sweep.
"""

from __future__ import annotations

import json
import os
import shutil
import string
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .embed import EmbedderSpec, cosine, embed_texts
from .errors import BudgetError, RcgError, UpstreamError

_EDGE_PUNCT = string.punctuation


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def _rouge_tokens(text: str) -> list[str]:
    out = []
    for tok in text.split():
        tok = tok.casefold().strip(_EDGE_PUNCT)
        if tok:
            out.append(tok)
    return out


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    """Dynamic-programming LCS length, O(len(a) * len(b)), O(min) memory."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS F-measure over whitespace tokens, case-folded, edge punctuation
    stripped; empty sides score 0."""
    cand = _rouge_tokens(candidate)
    ref = _rouge_tokens(reference)
    if not cand or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_len(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    if precision + recall == 0.0:
        return RougeScore(0.0, 0.0, 0.0)
    f1 = 2.0 * precision * recall / (precision + recall)
    return RougeScore(precision, recall, f1)


def sentence_sim(query: str, passage: str, embedder: EmbedderSpec) -> float:
    """Cosine similarity of the whole-text embeddings."""
    vecs = embed_texts(embedder, [query, passage]).vectors
    return cosine(vecs[0], vecs[1])


def token_sim(query: str, passage: str, embedder: EmbedderSpec) -> float:
    """Recall-direction token matching: mean over query tokens of the best
    cosine against any passage token; whitespace tokens, 0 when either side
    has none."""
    q_tokens = query.split()
    p_tokens = passage.split()
    if not q_tokens or not p_tokens:
        return 0.0
    unique = list(dict.fromkeys(q_tokens + p_tokens))
    vecs = embed_texts(embedder, unique).vectors.astype(np.float64)
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    vecs = vecs / np.where(norms == 0.0, 1.0, norms)
    pos = {tok: i for i, tok in enumerate(unique)}
    q_mat = vecs[[pos[t] for t in q_tokens]]
    p_mat = vecs[[pos[t] for t in p_tokens]]
    sims = q_mat @ p_mat.T
    return float(np.clip(sims.max(axis=1).mean(), -1.0, 1.0))


# -- per-turn logging ----------------------------------------------------------


@dataclass
class AnalysisRecord:
    timestamp: float
    mode: str
    kb_id: str | None
    query: str
    retrieved: list[dict]  # {passage_id, score, text}
    epw_weight: int
    prompt_chars: int
    response: str
    sentence_sim: list[float]
    token_sim: list[float]
    latency_ms: dict  # {retrieve, generate, total}

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "AnalysisRecord":
        return cls(**json.loads(line))


class AnalysisLog:
    """Append-only line-delimited log with a single serialized writer."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: AnalysisRecord) -> None:
        line = record.to_json()
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(line)
                fh.write("\n")

    def read(self, offset: int = 0, limit: int | None = None) -> list[AnalysisRecord]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                if i < offset:
                    continue
                if limit is not None and len(records) >= limit:
                    break
                line = line.strip()
                if line:
                    records.append(AnalysisRecord.from_json(line))
        return records

    def count(self) -> int:
        if not self.path.exists():
            return 0
        with open(self.path, encoding="utf-8") as fh:
            return sum(1 for line in fh if line.strip())

    def export(self, dest: str | Path) -> None:
        """Copy the current log atomically (temp file + rename)."""
        dest = Path(dest)
        with self._lock:
            tmp = dest.with_name(dest.name + ".tmp")
            if self.path.exists():
                shutil.copyfile(self.path, tmp)
            else:
                tmp.write_text("", encoding="utf-8")
            os.replace(tmp, dest)


# -- evaluation harness --------------------------------------------------------


@dataclass(frozen=True)
class EvalPair:
    query: str
    label: str

    def __post_init__(self):
        if not self.query or not self.label:
            raise RcgError("eval pairs need nonempty query and label")


@dataclass(frozen=True)
class Approach:
    """One column of the comparison: which prompt set, whether retrieval runs,
    and an optional prompt-weighting override."""

    tag: str
    prompt_set: str
    retrieval: bool
    epw_weight: int | None = None


def parse_approach(name: str) -> Approach:
    low = name.strip().lower()
    if low == "rog":
        return Approach("ROG", "rog", retrieval=False)
    if low == "rag":
        return Approach("RAG", "rag", retrieval=True)
    if low == "rcg":
        return Approach("RCG", "rcg", retrieval=True)
    if low.startswith("rcg-epw-"):
        weight = int(low.rsplit("-", 1)[1])
        if not 0 <= weight <= 100:
            raise RcgError(f"epw weight out of range in approach {name!r}")
        return Approach(f"RCG-EPW-{weight}", "rcg", retrieval=True, epw_weight=weight)
    # any other name is a custom prompt set used with retrieval on
    return Approach(name, name, retrieval=True)


def sweep_approaches(spec: str = "10:90:10") -> list[Approach]:
    """Expand start:stop:step into RCG-EPW-w approaches, stop inclusive."""
    try:
        start, stop, step = (int(x) for x in spec.split(":"))
    except ValueError as exc:
        raise RcgError(f"bad sweep spec {spec!r}, expected start:stop:step") from exc
    if step <= 0 or not (0 <= start <= stop <= 100):
        raise RcgError(f"bad sweep spec {spec!r}")
    return [parse_approach(f"rcg-epw-{w}") for w in range(start, stop + 1, step)]


@dataclass(frozen=True)
class EvalRow:
    query: str
    response: str
    rouge_l: float
    time_s: float
    error: str | None = None


@dataclass(frozen=True)
class EvalReport:
    approach: str
    rows: list[EvalRow]
    mean_rouge_l: float
    mean_time_per_query_s: float

    @classmethod
    def from_rows(cls, approach: str, rows: list[EvalRow]) -> "EvalReport":
        n = len(rows)
        return cls(
            approach=approach,
            rows=rows,
            mean_rouge_l=sum(r.rouge_l for r in rows) / n if n else 0.0,
            mean_time_per_query_s=sum(r.time_s for r in rows) / n if n else 0.0,
        )


def load_eval_pairs(path: str | Path) -> list[EvalPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                pairs.append(EvalPair(query=obj["query"], label=obj["label"]))
    return pairs


def run_eval(
    dataset: Sequence[EvalPair],
    turn_fn: Callable[[str, Approach], str],
    approaches: Iterable[Approach],
) -> list[EvalReport]:
    """Run every query through each approach sequentially (honest latency),
    scoring Rouge-L F1 against the label; a failed generation scores 0 with
    the error noted and the run continues."""
    if not dataset:
        raise RcgError("eval dataset is empty")
    reports = []
    for approach in approaches:
        rows = []
        for pair in dataset:
            t0 = time.perf_counter()
            error = None
            response = ""
            try:
                response = turn_fn(pair.query, approach)
            except (UpstreamError, BudgetError, RcgError) as exc:
                error = str(exc)
            elapsed = time.perf_counter() - t0
            score = rouge_l(response, pair.label).f1 if error is None else 0.0
            rows.append(
                EvalRow(query=pair.query, response=response, rouge_l=score, time_s=elapsed, error=error)
            )
        reports.append(EvalReport.from_rows(approach.tag, rows))
    return reports
