"""HTTP API: streaming chat, retrieval tuning, prompt/config editing, KB
management, and analysis access.

Generation is the scarce resource: chat requests pass through a bounded FIFO
admission queue in front of a small pool of generation slots; everything else
(config, prompts, KB listing, logs) bypasses the queue. With --read-only
every mutating route answers 403 and nothing on disk changes.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from collections import deque
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse, RedirectResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .analysis import load_eval_pairs, parse_approach, run_eval, sweep_approaches
from .config import ToolConfig
from .errors import BudgetError, ConfigError, IndexLoadError, RcgError, UpstreamError
from .pipeline import Engine, PreparedTurn, retrieval_event_payload
from .prompt import CatalogError, PromptCatalog, save_catalog
from .retrieval import MODES


class QueueFullError(RcgError):
    pass


class _Ticket:
    def __init__(self, queue: "GenerationQueue", event: threading.Event | None):
        self._queue = queue
        self._event = event
        self._done = False

    def wait(self) -> None:
        if self._event is not None:
            self._event.wait()

    def dispose(self) -> None:
        """Release the slot, or withdraw from the queue if never granted."""
        if self._done:
            return
        self._done = True
        self._queue._dispose(self._event)


class GenerationQueue:
    """Bounded FIFO admission in front of `slots` concurrent generations.

    enqueue() either grants a slot immediately, parks the caller in FIFO
    order, or raises QueueFullError when `capacity` requests already wait.
    Slots are handed directly to the head waiter on release.
    """

    def __init__(self, slots: int, capacity: int):
        self._lock = threading.Lock()
        self._free = slots
        self._capacity = capacity
        self._waiters: deque[threading.Event] = deque()

    def enqueue(self) -> _Ticket:
        with self._lock:
            if self._free > 0:
                self._free -= 1
                return _Ticket(self, None)
            if len(self._waiters) >= self._capacity:
                raise QueueFullError(
                    f"generation queue full ({self._capacity} waiting)"
                )
            event = threading.Event()
            self._waiters.append(event)
            return _Ticket(self, event)

    def queued(self) -> int:
        with self._lock:
            return len(self._waiters)

    def _dispose(self, event: threading.Event | None) -> None:
        with self._lock:
            if event is not None and not event.is_set():
                # never granted: withdraw instead of releasing a slot
                try:
                    self._waiters.remove(event)
                    return
                except ValueError:
                    pass  # granted between checks; fall through to release
            if self._waiters:
                self._waiters.popleft().set()
            else:
                self._free += 1


def sse_frame(event: str, data: dict) -> str:
    return f"event: {event}\ndata: {json.dumps(data, ensure_ascii=False)}\n\n"


class AppState:
    def __init__(self, config_path: Path, engine: Engine, read_only: bool):
        self.config_path = config_path
        self.engine = engine
        self.read_only = read_only
        self.lock = threading.Lock()  # guards engine/catalog swaps
        self.queue = GenerationQueue(
            slots=engine.cfg.server.max_concurrent_generations,
            capacity=engine.cfg.server.queue_capacity,
        )
        self.eval_jobs: dict[str, dict] = {}


def _validate_chat_request(body: dict, engine: Engine) -> dict:
    if not isinstance(body, dict):
        raise RcgError("request body must be a JSON object")
    query = body.get("query")
    if not isinstance(query, str) or not query.strip():
        raise RcgError("query must be a nonempty string")
    mode = body.get("mode")
    if mode is not None and mode not in MODES:
        raise RcgError(f"mode must be one of {MODES}")
    approach = body.get("approach")
    if approach is not None and approach not in engine.catalog:
        raise RcgError(f"unknown prompt set {approach!r}")
    k = body.get("k")
    if k is not None and (not isinstance(k, int) or k < 1):
        raise RcgError("k must be a positive integer")
    epw = body.get("epw_weight")
    if epw is not None and (not isinstance(epw, int) or not 0 <= epw <= 100):
        raise RcgError("epw_weight must be an integer in [0, 100]")
    ef = body.get("ef_search")
    if ef is not None and (not isinstance(ef, int) or ef < 1):
        raise RcgError("ef_search must be a positive integer")
    known = {"query", "mode", "approach", "kb_id", "k", "epw_weight", "ef_search", "stream"}
    unknown = set(body) - known
    if unknown:
        raise RcgError(f"unknown request fields {sorted(unknown)}")
    return {
        "query": query,
        "mode": mode,
        "approach": approach,
        "kb_id": body.get("kb_id"),
        "k": k,
        "epw_weight": epw,
        "ef_search": ef,
    }


def create_app(
    config_path: str | Path,
    read_only: bool = False,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    config_path = Path(config_path)
    engine = Engine.from_config(ToolConfig.load(config_path))
    state = AppState(config_path, engine, read_only)
    app = FastAPI(title="rcgkit", version=__version__)
    app.state.rcg = state

    def guard_mutation():
        if state.read_only:
            raise HTTPException(status_code=403, detail="server is in read-only mode")

    @app.get("/status")
    def status():
        return {
            "version": __version__,
            "read_only": state.read_only,
            "kb_count": len(state.engine.registry),
            "queued": state.queue.queued(),
        }

    # -- chat -----------------------------------------------------------------

    @app.post("/chat")
    def chat(body: dict = Body(...)):
        engine = state.engine
        try:
            req = _validate_chat_request(body, engine)
        except RcgError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        stream = body.get("stream", True)

        try:
            prepared = engine.prepare_turn(
                req["query"],
                mode=req["mode"],
                approach=req["approach"],
                kb_id=req["kb_id"],
                k=req["k"],
                epw_weight=req["epw_weight"],
                ef_search=req["ef_search"],
            )
        except BudgetError as exc:
            return JSONResponse(
                status_code=422,
                content={
                    "error": "budget",
                    "message": str(exc),
                    "estimate": exc.estimate,
                    "budget": exc.budget,
                },
            )
        except UpstreamError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        except RcgError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        try:
            ticket = state.queue.enqueue()
        except QueueFullError as exc:
            raise HTTPException(status_code=429, detail=str(exc))

        if stream:
            return StreamingResponse(
                _chat_event_stream(engine, prepared, ticket),
                media_type="text/event-stream",
                headers={"Cache-Control": "no-cache"},
            )
        return _chat_json(engine, prepared, ticket)

    def _chat_event_stream(engine: Engine, prepared: PreparedTurn, ticket: _Ticket):
        try:
            yield sse_frame("retrieval", retrieval_event_payload(prepared))
            ticket.wait()
            t0 = time.perf_counter()
            parts = []
            for event in engine.stream_turn(prepared):
                if event.kind == "token":
                    parts.append(event.text)
                    yield sse_frame("token", {"text": event.text})
                elif event.kind == "error":
                    yield sse_frame("error", {"code": event.code, "message": event.message})
                else:
                    generate_ms = (time.perf_counter() - t0) * 1000.0
                    yield sse_frame(
                        "done",
                        {
                            "finish_reason": event.finish_reason,
                            "usage": event.usage,
                            "response": "".join(parts),
                            "latency_ms": {
                                "retrieve": prepared.retrieve_ms,
                                "generate": generate_ms,
                                "total": prepared.retrieve_ms + generate_ms,
                            },
                        },
                    )
        finally:
            ticket.dispose()

    def _chat_json(engine: Engine, prepared: PreparedTurn, ticket: _Ticket):
        try:
            ticket.wait()
            result = engine.complete_turn(prepared)
        finally:
            ticket.dispose()
        if result.error:
            raise HTTPException(status_code=502, detail=result.error)
        return {
            "response": result.response,
            "retrieval": retrieval_event_payload(prepared),
            "finish_reason": result.finish_reason,
            "usage": result.usage,
            "latency_ms": result.latency_ms,
        }

    # -- prompts ----------------------------------------------------------------

    @app.get("/prompts")
    def get_prompts():
        return state.engine.catalog.to_dict()

    @app.get("/prompts/defaults")
    def get_prompt_defaults():
        from .prompt import builtin_defaults

        return builtin_defaults().to_dict()

    @app.put("/prompts")
    def put_prompts(body: dict = Body(...)):
        guard_mutation()
        try:
            catalog = PromptCatalog.from_dict(body)
        except CatalogError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        with state.lock:
            cfg = state.engine.cfg
            path = cfg.resolve(cfg.prompt_catalog) if cfg.prompt_catalog else None
            if path is not None:
                save_catalog(catalog, path)
            state.engine.catalog = catalog
        return {"saved": True, "names": catalog.names()}

    # -- config -------------------------------------------------------------------

    @app.get("/config")
    def get_config():
        return state.engine.cfg.to_dict()

    @app.put("/config")
    def put_config(body: dict = Body(...)):
        guard_mutation()
        try:
            new_cfg = ToolConfig.from_dict(body, base_dir=state.config_path.parent)
            new_engine = Engine.from_config(new_cfg)
        except (ConfigError, IndexLoadError, RcgError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        with state.lock:
            new_cfg.save(state.config_path)
            state.engine = new_engine
        return {"saved": True}

    # -- knowledge bases ------------------------------------------------------------

    @app.get("/kb")
    def list_kbs():
        return {
            "knowledge_bases": [
                {
                    "kb_id": kb.kb_id,
                    "name": kb.name,
                    "description": kb.description,
                    "passages": len(kb.passages),
                    "dim": kb.index.dim,
                    "index_kind": type(kb.index).__name__,
                }
                for kb in state.engine.registry.list()
            ]
        }

    @app.post("/kb/reindex")
    def reindex(body: dict = Body(...)):
        guard_mutation()
        kb_id = body.get("kb_id")
        if not kb_id:
            raise HTTPException(status_code=400, detail="kb_id is required")
        try:
            kb = state.engine.reindex(kb_id)
        except RcgError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except UpstreamError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        return {"kb_id": kb.kb_id, "passages": len(kb.passages)}

    # -- analysis ---------------------------------------------------------------------

    @app.get("/analysis/log")
    def analysis_log(offset: int = 0, limit: int = 100):
        log = state.engine.log
        if log is None:
            return {"records": [], "total": 0}
        records = log.read(offset=offset, limit=limit)
        return {
            "records": [json.loads(r.to_json()) for r in records],
            "total": log.count(),
        }

    @app.post("/analysis/eval")
    def start_eval(body: dict = Body(default={})):
        guard_mutation()
        engine = state.engine
        approaches = [parse_approach(a) for a in body.get("approaches", ["rog", "rag", "rcg"])]
        if body.get("epw_sweep"):
            approaches.extend(sweep_approaches(body["epw_sweep"]))
        dataset_path = body.get("dataset")
        if dataset_path is None:
            from .fixtures import default_eval_dataset_path

            dataset_path = default_eval_dataset_path()
        try:
            pairs = load_eval_pairs(engine.cfg.resolve(str(dataset_path)))
        except (OSError, RcgError, json.JSONDecodeError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=f"cannot load dataset: {exc}")
        job_id = uuid.uuid4().hex
        state.eval_jobs[job_id] = {"status": "running"}

        def work():
            try:
                reports = run_eval(pairs, engine.eval_turn_fn(), approaches)
                state.eval_jobs[job_id] = {
                    "status": "done",
                    "reports": [
                        {
                            "approach": r.approach,
                            "mean_rouge_l": r.mean_rouge_l,
                            "mean_time_per_query_s": r.mean_time_per_query_s,
                            "rows": [
                                {
                                    "query": row.query,
                                    "response": row.response,
                                    "rouge_l": row.rouge_l,
                                    "time_s": row.time_s,
                                    "error": row.error,
                                }
                                for row in r.rows
                            ],
                        }
                        for r in reports
                    ],
                }
            except Exception as exc:  # job must record, not crash the server
                state.eval_jobs[job_id] = {"status": "failed", "error": str(exc)}

        threading.Thread(target=work, daemon=True).start()
        return {"job_id": job_id}

    @app.get("/analysis/eval/{job_id}")
    def eval_status(job_id: str):
        job = state.eval_jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no eval job {job_id!r}")
        return job

    @app.post("/analysis/export")
    def export_log(body: dict = Body(default={})):
        guard_mutation()
        log = state.engine.log
        if log is None:
            raise HTTPException(status_code=400, detail="no analysis log configured")
        dest = body.get("path")
        if not dest:
            raise HTTPException(status_code=400, detail="path is required")
        log.export(state.engine.cfg.resolve(dest))
        return {"exported": str(dest)}

    # -- static UI -----------------------------------------------------------------------

    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

        @app.get("/")
        def root():
            return RedirectResponse(url="/ui/")

    return app
