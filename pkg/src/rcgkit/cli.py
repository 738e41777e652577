"""Operator entry point: build knowledge bases, serve the API (plus the
static web console), run one-shot queries, and run the evaluation harness.

Exit codes are a stable contract for scripts: 0 success, 1 usage error,
2 configuration error, 3 upstream (embedder/LLM) failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import load_eval_pairs, parse_approach, run_eval, sweep_approaches
from .config import KbEntry, ToolConfig
from .errors import BudgetError, ConfigError, IndexLoadError, RcgError, UpstreamError
from .fixtures import default_eval_dataset_path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_UPSTREAM = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcgkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_prep = sub.add_parser("prepare", help="ingest documents and build a knowledge base")
    p_prep.add_argument("--input", nargs="+", required=True, help="files or directories")
    p_prep.add_argument("--out", required=True, help="output directory for the KB files")
    p_prep.add_argument("--config", required=True)
    p_prep.add_argument("--kb-id", help="register the KB under this id in the config file")
    p_prep.add_argument("--name", help="display name (with --kb-id)")
    p_prep.add_argument("--description", default="", help="functional description (with --kb-id)")
    p_prep.add_argument("--extensions", help="comma-separated list overriding the loader default")

    p_serve = sub.add_parser("serve", help="start the HTTP API")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--read-only", action="store_true", help="reject all mutating routes")
    p_serve.add_argument("--ui-dir", help="serve a static web console from this directory")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, help="override the configured port")

    p_query = sub.add_parser("query", help="one-shot chat turn with retrieval trace")
    p_query.add_argument("--config", required=True)
    p_query.add_argument("--approach", default="rcg", help="prompt set: rcg, rag, rog, or custom")
    p_query.add_argument("--q", required=True, help="the query text")
    p_query.add_argument("--epw", type=int, help="explicit prompt-weighting percent [0..100]")
    p_query.add_argument("--k", type=int, help="passages to retrieve")
    p_query.add_argument("--kb", help="knowledge base id (manual mode)")
    p_query.add_argument("--mode", choices=["off", "manual", "mokb"], help="retrieval mode")

    p_eval = sub.add_parser("eval", help="Rouge-L / latency evaluation over a query-label dataset")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--dataset", help="JSONL of {query, label}; defaults to the bundled set")
    p_eval.add_argument("--approaches", default="rog,rag,rcg", help="comma-separated approach tags")
    p_eval.add_argument("--epw-sweep", help="start:stop:step weights, e.g. 10:90:10")
    p_eval.add_argument("--out-dir", default="eval_out", help="where TSV rows and figures land")
    p_eval.add_argument("--no-files", action="store_true", help="print the report only")
    return parser


def _load_engine(config_path: str):
    from .pipeline import Engine

    return Engine.from_config(ToolConfig.load(config_path))


def cmd_prepare(args) -> int:
    from .pipeline import prepare_kb_files

    cfg = ToolConfig.load(args.config)
    extensions = args.extensions.split(",") if args.extensions else None
    stats = prepare_kb_files(cfg, args.input, args.out, extensions=extensions)
    report = stats["load_report"]
    if report.skipped or report.replacements:
        print(report.summary(), file=sys.stderr)
    print(
        f"documents: {stats['documents']}\n"
        f"passages: {stats['passages']}\n"
        f"dim: {stats['dim']}\n"
        f"index: {stats['index_kind']}"
    )
    if args.kb_id:
        config_path = Path(args.config)

        def rel(p: str) -> str:
            try:
                return str(Path(p).resolve().relative_to(config_path.resolve().parent))
            except ValueError:
                return str(Path(p).resolve())

        entry = KbEntry(
            kb_id=args.kb_id,
            name=args.name or args.kb_id,
            description=args.description,
            passage_store=rel(stats["passage_store"]),
            index=rel(stats["index"]),
        )
        others = [kb for kb in cfg.knowledge_bases if kb.kb_id != args.kb_id]
        cfg.knowledge_bases = others + [entry]
        cfg.save(config_path)
        print(f"registered kb {args.kb_id!r} in {config_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    cfg = ToolConfig.load(args.config)
    app = create_app(args.config, read_only=args.read_only, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port or cfg.server.port, log_level="warning")
    return EXIT_OK


def cmd_query(args) -> int:
    engine = _load_engine(args.config)
    mode = args.mode or ("off" if args.approach == "rog" else None)
    result = engine.chat(
        args.q,
        mode=mode,
        approach=args.approach,
        kb_id=args.kb,
        k=args.k,
        epw_weight=args.epw,
    )
    rr = result.retrieval
    if rr is not None:
        print(f"kb: {rr.kb_id}")
        for hit in rr.hits:
            print(f"  [{hit.rank}] {hit.passage_id}  score={hit.score:.4f}")
        print(f"tokens: retrieved={rr.tokens_retrieved} injected={rr.tokens_injected}")
    else:
        print("retrieval: off")
    print("--- response ---")
    print(result.response)
    return EXIT_OK


def cmd_eval(args) -> int:
    engine = _load_engine(args.config)
    dataset_path = args.dataset or default_eval_dataset_path()
    pairs = load_eval_pairs(dataset_path)
    approaches = [parse_approach(a) for a in args.approaches.split(",") if a.strip()]
    if args.epw_sweep:
        approaches.extend(sweep_approaches(args.epw_sweep))
    reports = run_eval(pairs, engine.eval_turn_fn(), approaches)

    from .report import render_summary, write_report_files

    print(render_summary(reports))
    if not args.no_files:
        paths = write_report_files(reports, args.out_dir)
        print(f"\nwrote {paths['rows_tsv']}, {paths['summary_tsv']}")
        print(f"wrote {paths['rouge_figure']}, {paths['time_figure']}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "prepare": cmd_prepare,
        "serve": cmd_serve,
        "query": cmd_query,
        "eval": cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, IndexLoadError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UpstreamError, BudgetError) as exc:
        print(f"upstream error: {exc}", file=sys.stderr)
        return EXIT_UPSTREAM
    except RcgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
