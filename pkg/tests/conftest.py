import contextlib
import json
import socket
import threading
import time
from pathlib import Path

import pytest
import requests
import uvicorn
import yaml

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = REPO_ROOT / "fixtures" / "corpus"
EVAL_FIXTURE = REPO_ROOT / "fixtures" / "eval_table6.jsonl"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


def write_config(path: Path, **overrides) -> Path:
    """Write a config file wired to the offline doubles (test embedder, stub LLM)."""
    cfg = {
        "embedder": {"kind": "test", "model_name": "test-embedder", "dim": 64},
        "llm": {"kind": "stub"},
        "index": {"kind": "hnsw", "seed": 7},
        "prompt_catalog": "prompts.json",
        "analysis_log": "chat_log.jsonl",
    }
    cfg.update(overrides)
    path.write_text(yaml.safe_dump(cfg, sort_keys=False), encoding="utf-8")
    return path


@pytest.fixture()
def fixture_kb(tmp_path, corpus_dir):
    """prepare the fixture corpus into a tmp workspace; returns the config path."""
    from rcgkit.config import KbEntry, ToolConfig
    from rcgkit.pipeline import prepare_kb_files

    config_path = write_config(tmp_path / "config.yaml")
    cfg = ToolConfig.load(config_path)
    stats = prepare_kb_files(cfg, [corpus_dir], tmp_path / "kb")
    cfg.knowledge_bases = [
        KbEntry(
            kb_id="fixture",
            name="fixture corpus",
            description="field guides about bees, tides, and volcanoes",
            passage_store=stats["passage_store"],
            index=stats["index"],
        )
    ]
    cfg.save(config_path)
    return config_path


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class ServerHandle:
    def __init__(self, base_url: str, server: uvicorn.Server, thread: threading.Thread):
        self.base_url = base_url
        self._server = server
        self._thread = thread

    def stop(self):
        self._server.should_exit = True
        self._thread.join(timeout=10)


@contextlib.contextmanager
def run_app(app):
    """Serve an ASGI app on an ephemeral port in a daemon thread."""
    port = free_port()
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error", lifespan="off")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("test server failed to start")
        time.sleep(0.02)
    handle = ServerHandle(f"http://127.0.0.1:{port}", server, thread)
    try:
        yield handle
    finally:
        handle.stop()


def read_sse(response: requests.Response) -> list[tuple[str, dict]]:
    """Collect (event, payload) frames from a text/event-stream response."""
    events = []
    event_name = "message"
    data_lines: list[str] = []
    for raw in response.iter_lines(decode_unicode=True):
        if raw is None:
            continue
        if raw == "":
            if data_lines:
                events.append((event_name, json.loads("\n".join(data_lines))))
            event_name = "message"
            data_lines = []
            continue
        if raw.startswith("event:"):
            event_name = raw[len("event:") :].strip()
        elif raw.startswith("data:"):
            data_lines.append(raw[len("data:") :].strip())
    if data_lines:
        events.append((event_name, json.loads("\n".join(data_lines))))
    return events


def sse_chat(base_url: str, body: dict, timeout: float = 30.0) -> list[tuple[str, dict]]:
    with requests.post(f"{base_url}/chat", json=body, stream=True, timeout=timeout) as resp:
        resp.raise_for_status()
        return read_sse(resp)
