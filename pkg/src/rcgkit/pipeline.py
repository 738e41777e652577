"""Runtime engine: the loaded knowledge bases, prompt catalog, and analysis
log behind one chat entry point.

A turn is prepared synchronously (KB selection, retrieval, prompt assembly,
budget check) so callers can surface errors before any streaming starts, then
generation is streamed as events. The server, the CLI, and the evaluation
harness all run turns through this module.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from . import llm as llm_mod
from .analysis import AnalysisLog, AnalysisRecord, Approach, sentence_sim, token_sim
from .config import ToolConfig
from .embed import embed_texts
from .errors import BudgetError, ConfigError, RcgError, UpstreamError
from .index import build_flat, build_hnsw, load_index, save_index
from .ingest import read_passage_store
from .prompt import PromptCatalog, assemble, builtin_defaults, load_catalog, save_catalog
from .retrieval import (
    KbRegistry,
    KnowledgeBase,
    RetrievalConfig,
    RetrievalResult,
    retrieve,
    select_kb,
)


@dataclass
class PreparedTurn:
    query: str
    mode: str
    approach: str
    kb_id: str | None
    retrieval: RetrievalResult | None
    prompt: str
    retrieve_ms: float
    epw_weight: int
    log_turn: bool = True


@dataclass
class TurnResult:
    response: str
    prompt: str
    kb_id: str | None
    retrieval: RetrievalResult | None
    finish_reason: str | None
    usage: dict | None
    latency_ms: dict
    error: str | None = None


def retrieval_event_payload(prepared: PreparedTurn) -> dict:
    rr = prepared.retrieval
    return {
        "mode": prepared.mode,
        "approach": prepared.approach,
        "kb_id": prepared.kb_id,
        "epw_weight": prepared.epw_weight,
        "hits": [
            {"passage_id": h.passage_id, "score": h.score, "rank": h.rank}
            for h in (rr.hits if rr else [])
        ],
        "tokens_retrieved": rr.tokens_retrieved if rr else 0,
        "tokens_injected": rr.tokens_injected if rr else 0,
        "retrieve_ms": prepared.retrieve_ms,
    }


class Engine:
    """Everything a running instance needs, built from one ToolConfig."""

    def __init__(
        self,
        cfg: ToolConfig,
        registry: KbRegistry,
        catalog: PromptCatalog,
        log: AnalysisLog | None,
    ):
        self.cfg = cfg
        self.registry = registry
        self.catalog = catalog
        self.log = log

    @classmethod
    def from_config(cls, cfg: ToolConfig) -> "Engine":
        registry = KbRegistry()
        for entry in cfg.knowledge_bases:
            store_path = cfg.resolve(entry.passage_store)
            index_path = cfg.resolve(entry.index)
            if not store_path.exists():
                raise ConfigError(f"kb {entry.kb_id!r}: passage store missing: {store_path}")
            passages = read_passage_store(store_path)
            index = load_index(
                index_path,
                passage_ids=[p.passage_id for p in passages],
                expected_model_name=cfg.embedder.model_name,
            )
            if index.dim != cfg.embedder.dim:
                raise ConfigError(
                    f"kb {entry.kb_id!r}: index dim {index.dim} != embedder dim {cfg.embedder.dim}"
                )
            registry.register(
                KnowledgeBase(
                    kb_id=entry.kb_id,
                    name=entry.name,
                    description=entry.description,
                    passages=passages,
                    index=index,
                    embedder=cfg.embedder,
                )
            )

        if cfg.prompt_catalog:
            catalog_path = cfg.resolve(cfg.prompt_catalog)
            if catalog_path.exists():
                catalog = load_catalog(catalog_path)
            else:
                catalog = builtin_defaults()
                save_catalog(catalog, catalog_path)
        else:
            catalog = builtin_defaults()

        log = AnalysisLog(cfg.resolve(cfg.analysis_log)) if cfg.analysis_log else None
        return cls(cfg, registry, catalog, log)

    # -- one chat turn -------------------------------------------------------

    def prepare_turn(
        self,
        query: str,
        mode: str | None = None,
        approach: str | None = None,
        kb_id: str | None = None,
        k: int | None = None,
        epw_weight: int | None = None,
        ef_search: int | None = None,
        log_turn: bool = True,
    ) -> PreparedTurn:
        """Select KB, retrieve, assemble, and budget-check; raises before any
        generation so callers can map failures onto their own status codes."""
        defaults = self.cfg.defaults
        mode = mode or defaults.mode
        approach = approach or defaults.approach
        if approach == "rog":
            # the retrieval-off prompt set has no knowledge slots; a stray
            # knowledge string would be concatenated bare, so force mode off
            mode = "off"
        if approach not in self.catalog:
            raise RcgError(f"unknown prompt set {approach!r}")

        selected = kb_id or defaults_kb_id(self.registry, mode)
        rcfg = RetrievalConfig(
            mode=mode,
            selected_kb=selected if mode == "manual" else None,
            k=k if k is not None else defaults.k,
            epw_weight=epw_weight if epw_weight is not None else defaults.epw_weight,
            ef_search=ef_search if ef_search is not None else defaults.ef_search,
        )

        t0 = time.perf_counter()
        retrieval = None
        chosen = None
        if mode != "off":
            chosen = select_kb(query, self.registry.list(), rcfg)
            retrieval = retrieve(query, self.registry.get(chosen), rcfg)
        retrieve_ms = (time.perf_counter() - t0) * 1000.0

        prompt = assemble(self.catalog[approach], retrieval.knowledge_text if retrieval else "", query)
        estimate = llm_mod.estimate_tokens(prompt)
        if estimate > self.cfg.llm.context_budget:
            raise BudgetError(estimate, self.cfg.llm.context_budget)
        return PreparedTurn(
            query=query,
            mode=mode,
            approach=approach,
            kb_id=chosen,
            retrieval=retrieval,
            prompt=prompt,
            retrieve_ms=retrieve_ms,
            epw_weight=rcfg.epw_weight,
            log_turn=log_turn,
        )

    def stream_turn(self, prepared: PreparedTurn) -> Iterator[llm_mod.GenerationEvent]:
        """Generate for a prepared turn, logging the completed turn before the
        final done event is yielded."""
        t0 = time.perf_counter()
        parts: list[str] = []
        for event in llm_mod.generate_stream(self.cfg.llm, prepared.prompt):
            if event.kind == "token":
                parts.append(event.text)
                yield event
            elif event.kind == "error":
                yield event
                return
            else:
                generate_ms = (time.perf_counter() - t0) * 1000.0
                response = "".join(parts)
                if prepared.log_turn and self.log is not None:
                    self._log_turn(prepared, response, generate_ms)
                yield event

    def complete_turn(self, prepared: PreparedTurn) -> TurnResult:
        """Drain the stream into a TurnResult."""
        t0 = time.perf_counter()
        parts: list[str] = []
        finish_reason = None
        usage = None
        error = None
        for event in self.stream_turn(prepared):
            if event.kind == "token":
                parts.append(event.text)
            elif event.kind == "done":
                finish_reason = event.finish_reason
                usage = event.usage
            else:
                error = f"{event.code}: {event.message}"
        generate_ms = (time.perf_counter() - t0) * 1000.0
        return TurnResult(
            response="".join(parts),
            prompt=prepared.prompt,
            kb_id=prepared.kb_id,
            retrieval=prepared.retrieval,
            finish_reason=finish_reason,
            usage=usage,
            latency_ms={
                "retrieve": prepared.retrieve_ms,
                "generate": generate_ms,
                "total": prepared.retrieve_ms + generate_ms,
            },
            error=error,
        )

    def chat(self, query: str, **kwargs) -> TurnResult:
        """Prepare + complete in one call; raises UpstreamError on failure."""
        result = self.complete_turn(self.prepare_turn(query, **kwargs))
        if result.error:
            raise UpstreamError(result.error)
        return result

    def eval_turn_fn(self):
        """Turn runner for the evaluation harness: no logging, approach-driven."""

        def run(query: str, approach: Approach) -> str:
            result = self.complete_turn(
                self.prepare_turn(
                    query,
                    mode="off" if not approach.retrieval else None,
                    approach=approach.prompt_set,
                    epw_weight=approach.epw_weight,
                    log_turn=False,
                )
            )
            if result.error:
                raise UpstreamError(result.error)
            return result.response

        return run

    # -- maintenance ---------------------------------------------------------

    def reindex(self, kb_id: str) -> KnowledgeBase:
        """Re-embed a KB's passages and rebuild + persist its index."""
        entry = next((e for e in self.cfg.knowledge_bases if e.kb_id == kb_id), None)
        if entry is None:
            raise RcgError(f"unknown knowledge base {kb_id!r}")
        passages = read_passage_store(self.cfg.resolve(entry.passage_store))
        matrix = embed_texts(self.cfg.embedder, [p.text for p in passages])
        matrix.ids = [p.passage_id for p in passages]
        index = build_index(matrix, self.cfg)
        save_index(index, self.cfg.resolve(entry.index))
        kb = KnowledgeBase(
            kb_id=entry.kb_id,
            name=entry.name,
            description=entry.description,
            passages=passages,
            index=index,
            embedder=self.cfg.embedder,
        )
        self.registry.replace(kb)
        return kb

    def _log_turn(self, prepared: PreparedTurn, response: str, generate_ms: float) -> None:
        hits = prepared.retrieval.hits if prepared.retrieval else []
        record = AnalysisRecord(
            timestamp=time.time(),
            mode=prepared.mode,
            kb_id=prepared.kb_id,
            query=prepared.query,
            retrieved=[
                {"passage_id": h.passage_id, "score": h.score, "text": h.text} for h in hits
            ],
            epw_weight=prepared.epw_weight,
            prompt_chars=len(prepared.prompt),
            response=response,
            sentence_sim=[sentence_sim(prepared.query, h.text, self.cfg.embedder) for h in hits],
            token_sim=[token_sim(prepared.query, h.text, self.cfg.embedder) for h in hits],
            latency_ms={
                "retrieve": prepared.retrieve_ms,
                "generate": generate_ms,
                "total": prepared.retrieve_ms + generate_ms,
            },
        )
        self.log.append(record)


def defaults_kb_id(registry: KbRegistry, mode: str) -> str | None:
    """Manual mode falls back to the first registered KB when none is named."""
    if mode != "manual":
        return None
    kbs = registry.list()
    return kbs[0].kb_id if kbs else None


def build_index(matrix, cfg: ToolConfig):
    if cfg.index.kind == "flat":
        return build_flat(matrix, model_name=cfg.embedder.model_name)
    return build_hnsw(
        matrix,
        M=cfg.index.M,
        ef_construction=cfg.index.ef_construction,
        seed=cfg.index.seed,
        model_name=cfg.embedder.model_name,
    )


def prepare_kb_files(
    cfg: ToolConfig,
    input_paths: list[str | Path],
    out_dir: str | Path,
    extensions: list[str] | None = None,
) -> dict:
    """Ingest -> embed -> index into out_dir; returns build stats.

    Writes passages.jsonl and index.rcgx; the paths land in the returned dict
    so callers can register the KB in the config.
    """
    import os

    from .ingest import DEFAULT_EXTENSIONS, LoadReport, build_passage_store, discover, load_stream

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store_path = out_dir / "passages.jsonl"
    index_path = out_dir / "index.rcgx"

    files = discover(input_paths, extensions or DEFAULT_EXTENSIONS)
    resolved = [str(Path(p).resolve()) for p in input_paths]
    if len(resolved) == 1 and Path(resolved[0]).is_dir():
        root = resolved[0]
    else:
        root = os.path.commonpath(resolved) if resolved else None
    report = LoadReport()
    count = build_passage_store(load_stream(files, report=report, root=root), cfg.splitter, store_path)
    passages = read_passage_store(store_path)
    matrix = embed_texts(cfg.embedder, [p.text for p in passages])
    matrix.ids = [p.passage_id for p in passages]
    index = build_index(matrix, cfg)
    save_index(index, index_path)
    return {
        "documents": report.loaded,
        "passages": count,
        "dim": cfg.embedder.dim,
        "index_kind": cfg.index.kind,
        "passage_store": str(store_path),
        "index": str(index_path),
        "load_report": report,
    }
