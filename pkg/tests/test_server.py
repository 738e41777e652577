import hashlib
import json
import threading
import time
from pathlib import Path

import pytest
import requests
import yaml

from rcgkit.server import GenerationQueue, QueueFullError, create_app

from conftest import read_sse, run_app, sse_chat
from mock_endpoints import make_llm_app


@pytest.fixture()
def stub_server(fixture_kb):
    app = create_app(fixture_kb)
    with run_app(app) as handle:
        yield handle


def _file_hashes(directory: Path) -> dict[str, str]:
    return {
        str(p): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


# -- basics ---------------------------------------------------------------------


def test_status(stub_server):
    body = requests.get(f"{stub_server.base_url}/status", timeout=10).json()
    assert body["read_only"] is False
    assert body["kb_count"] == 1


def test_kb_listing(stub_server):
    body = requests.get(f"{stub_server.base_url}/kb", timeout=10).json()
    (kb,) = body["knowledge_bases"]
    assert kb["kb_id"] == "fixture"
    assert kb["passages"] == 4
    assert kb["dim"] == 64


def test_chat_off_mode_stub_response(stub_server):
    resp = requests.post(
        f"{stub_server.base_url}/chat",
        json={"query": "Q", "mode": "off", "approach": "rog", "stream": False},
        timeout=30,
    )
    assert resp.status_code == 200
    assert resp.json()["response"] == "NO-KNOWLEDGE: Q"


def test_chat_stream_event_order_and_integrity(stub_server):
    events = sse_chat(
        stub_server.base_url,
        {"query": "how do honey bees communicate in the hive?", "approach": "rcg"},
    )
    kinds = [k for k, _ in events]
    assert kinds[0] == "retrieval"
    assert kinds[-1] == "done"
    assert set(kinds[1:-1]) == {"token"}
    retrieval = events[0][1]
    assert retrieval["kb_id"] == "fixture"
    assert retrieval["hits"][0]["passage_id"].startswith("beekeeping")
    assert retrieval["tokens_injected"] <= retrieval["tokens_retrieved"]
    done = events[-1][1]
    tokens = "".join(p["text"] for k, p in events if k == "token")
    assert tokens == done["response"]
    # stream integrity: logged response equals the streamed concatenation
    log = requests.get(f"{stub_server.base_url}/analysis/log", timeout=10).json()
    assert log["records"][-1]["response"] == done["response"]


def test_chat_validation_errors(stub_server):
    url = f"{stub_server.base_url}/chat"
    assert requests.post(url, json={"query": ""}, timeout=10).status_code == 400
    assert requests.post(url, json={"query": "q", "mode": "bogus"}, timeout=10).status_code == 400
    assert (
        requests.post(url, json={"query": "q", "approach": "missing-set"}, timeout=10).status_code
        == 400
    )
    assert (
        requests.post(url, json={"query": "q", "epw_weight": 150}, timeout=10).status_code == 400
    )
    assert requests.post(url, json={"query": "q", "wat": 1}, timeout=10).status_code == 400


def test_chat_epw_weight_respected(stub_server):
    events = sse_chat(
        stub_server.base_url,
        {"query": "volcanoes and eruptions", "approach": "rcg", "epw_weight": 50, "k": 2},
    )
    retrieval = events[0][1]
    assert retrieval["epw_weight"] == 50
    assert retrieval["tokens_injected"] < retrieval["tokens_retrieved"]


def test_budget_error_is_structured_422(tmp_path, fixture_kb):
    cfg = yaml.safe_load(Path(fixture_kb).read_text())
    cfg["llm"] = {"kind": "stub", "context_budget": 10}
    Path(fixture_kb).write_text(yaml.safe_dump(cfg))
    app = create_app(fixture_kb)
    with run_app(app) as handle:
        resp = requests.post(
            f"{handle.base_url}/chat",
            json={"query": "many words " * 50, "approach": "rcg"},
            timeout=30,
        )
    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "budget"
    assert body["estimate"] > body["budget"] == 10


def test_upstream_failure_is_502(tmp_path, fixture_kb):
    cfg = yaml.safe_load(Path(fixture_kb).read_text())
    cfg["llm"] = {
        "kind": "remote",
        "endpoint_url": "http://127.0.0.1:9/v1/completions",
        "max_retries": 1,
        "request_timeout_s": 2,
    }
    Path(fixture_kb).write_text(yaml.safe_dump(cfg))
    app = create_app(fixture_kb)
    with run_app(app) as handle:
        resp = requests.post(
            f"{handle.base_url}/chat",
            json={"query": "q", "approach": "rcg", "stream": False},
            timeout=30,
        )
    assert resp.status_code == 502


# -- prompts ----------------------------------------------------------------------


def test_prompts_round_trip(stub_server):
    url = f"{stub_server.base_url}/prompts"
    catalog = requests.get(url, timeout=10).json()
    catalog["rcg"]["retriever_suffix"] = '"\nanswer carefully.\nwith newlines\n'
    put = requests.put(url, json=catalog, timeout=10)
    assert put.status_code == 200
    got = requests.get(url, timeout=10).json()
    assert got == catalog  # byte-level fidelity of every slot string


def test_prompts_reject_unknown_fields(stub_server):
    url = f"{stub_server.base_url}/prompts"
    catalog = requests.get(url, timeout=10).json()
    catalog["rcg"]["mystery"] = "x"
    assert requests.put(url, json=catalog, timeout=10).status_code == 422


# -- config ---------------------------------------------------------------------------


def test_config_get_and_put_round_trip(stub_server):
    url = f"{stub_server.base_url}/config"
    cfg = requests.get(url, timeout=10).json()
    cfg["defaults"]["k"] = 3
    assert requests.put(url, json=cfg, timeout=10).status_code == 200
    assert requests.get(url, timeout=10).json()["defaults"]["k"] == 3


def test_config_put_invalid_dim_rolls_back(stub_server, fixture_kb):
    url = f"{stub_server.base_url}/config"
    before = requests.get(url, timeout=10).json()
    file_before = Path(fixture_kb).read_bytes()

    bad = json.loads(json.dumps(before))
    bad["embedder"]["dim"] = -5
    resp = requests.put(url, json=bad, timeout=10)
    assert resp.status_code == 422

    # dim valid per se but inconsistent with the built index: also rolled back
    bad2 = json.loads(json.dumps(before))
    bad2["embedder"]["dim"] = 32
    resp2 = requests.put(url, json=bad2, timeout=10)
    assert resp2.status_code == 422

    assert requests.get(url, timeout=10).json() == before
    assert Path(fixture_kb).read_bytes() == file_before
    # the engine still serves chat with the old config
    ok = requests.post(
        f"{stub_server.base_url}/chat",
        json={"query": "bees", "approach": "rcg", "stream": False},
        timeout=30,
    )
    assert ok.status_code == 200


# -- read-only mode ---------------------------------------------------------------------


def test_read_only_rejects_mutations_and_preserves_files(fixture_kb, tmp_path):
    workdir = Path(fixture_kb).parent
    app = create_app(fixture_kb, read_only=True)
    with run_app(app) as handle:
        base = handle.base_url
        hashes_before = _file_hashes(workdir)
        catalog = requests.get(f"{base}/prompts", timeout=10).json()
        config = requests.get(f"{base}/config", timeout=10).json()

        assert requests.put(f"{base}/prompts", json=catalog, timeout=10).status_code == 403
        assert requests.put(f"{base}/config", json=config, timeout=10).status_code == 403
        assert (
            requests.post(f"{base}/kb/reindex", json={"kb_id": "fixture"}, timeout=10).status_code
            == 403
        )
        assert requests.post(f"{base}/analysis/eval", json={}, timeout=10).status_code == 403
        assert (
            requests.post(f"{base}/analysis/export", json={"path": "x"}, timeout=10).status_code
            == 403
        )
        # chat (with logging disabled for the comparison) still works read-only
        resp = requests.post(
            f"{base}/chat",
            json={"query": "Q", "mode": "off", "approach": "rog", "stream": False},
            timeout=30,
        )
        assert resp.status_code == 200
        hashes_after = {
            k: v for k, v in _file_hashes(workdir).items() if "chat_log" not in k
        }
        hashes_before = {k: v for k, v in hashes_before.items() if "chat_log" not in k}
        assert hashes_after == hashes_before
        assert requests.get(f"{base}/status", timeout=10).json()["read_only"] is True


# -- reindex ------------------------------------------------------------------------------


def test_reindex_unknown_kb_404(stub_server):
    resp = requests.post(
        f"{stub_server.base_url}/kb/reindex", json={"kb_id": "ghost"}, timeout=30
    )
    assert resp.status_code == 404


def test_reindex_rebuilds(stub_server):
    resp = requests.post(
        f"{stub_server.base_url}/kb/reindex", json={"kb_id": "fixture"}, timeout=60
    )
    assert resp.status_code == 200
    assert resp.json() == {"kb_id": "fixture", "passages": 4}
    # still searchable afterwards
    events = sse_chat(stub_server.base_url, {"query": "spring tides", "approach": "rcg"})
    assert events[0][1]["hits"]


# -- eval job ---------------------------------------------------------------------------


def test_eval_background_job(stub_server):
    base = stub_server.base_url
    resp = requests.post(
        f"{base}/analysis/eval", json={"approaches": ["rog", "rcg"]}, timeout=10
    )
    assert resp.status_code == 200
    job_id = resp.json()["job_id"]
    deadline = time.time() + 60
    while True:
        job = requests.get(f"{base}/analysis/eval/{job_id}", timeout=10).json()
        if job["status"] != "running":
            break
        assert time.time() < deadline, "eval job did not finish"
        time.sleep(0.2)
    assert job["status"] == "done"
    assert [r["approach"] for r in job["reports"]] == ["ROG", "RCG"]
    assert all(len(r["rows"]) == 10 for r in job["reports"])


def test_eval_job_unknown_id_404(stub_server):
    assert (
        requests.get(f"{stub_server.base_url}/analysis/eval/nope", timeout=10).status_code == 404
    )


# -- generation queue ----------------------------------------------------------------------


def test_queue_unit_fifo_and_capacity():
    q = GenerationQueue(slots=1, capacity=2)
    t1 = q.enqueue()  # grabs the slot
    t2 = q.enqueue()
    t3 = q.enqueue()
    with pytest.raises(QueueFullError):
        q.enqueue()
    order = []
    threads = [
        threading.Thread(target=lambda t=t, i=i: (t.wait(), order.append(i)))
        for i, t in ((2, t2), (3, t3))
    ]
    for th in threads:
        th.start()
    time.sleep(0.1)
    assert order == []
    t1.dispose()  # hand off to t2
    time.sleep(0.1)
    assert order == [2]
    t2.dispose()
    time.sleep(0.1)
    assert order == [2, 3]
    t3.dispose()
    t4 = q.enqueue()  # slot free again
    t4.dispose()


def test_queue_withdraw_while_waiting():
    q = GenerationQueue(slots=1, capacity=2)
    t1 = q.enqueue()
    t2 = q.enqueue()
    t2.dispose()  # withdraws without ever holding the slot
    t1.dispose()
    t3 = q.enqueue()  # slot must be free, not leaked
    t3.dispose()


def _gated_llm_config(fixture_kb: Path, base_url: str):
    cfg = yaml.safe_load(Path(fixture_kb).read_text())
    cfg["llm"] = {
        "kind": "remote",
        "endpoint_url": f"{base_url}/v1/completions",
        "request_timeout_s": 60,
        "max_retries": 1,
    }
    cfg["server"] = {"queue_capacity": 2, "max_concurrent_generations": 1}
    Path(fixture_kb).write_text(yaml.safe_dump(cfg))


def test_queue_full_returns_429_under_stalled_llm(fixture_kb):
    gate = threading.Event()
    llm_app = make_llm_app(["done "], gate=gate)
    with run_app(llm_app) as llm:
        _gated_llm_config(fixture_kb, llm.base_url)
        app = create_app(fixture_kb)
        with run_app(app) as handle:
            base = handle.base_url
            results: dict[int, int] = {}

            def fire(i):
                with requests.post(
                    f"{base}/chat",
                    json={"query": "Q", "mode": "off", "approach": "rog"},
                    stream=True,
                    timeout=60,
                ) as resp:
                    results[i] = resp.status_code
                    if resp.status_code == 200:
                        read_sse(resp)

            threads = [threading.Thread(target=fire, args=(i,)) for i in range(3)]
            for th in threads:
                th.start()
                time.sleep(0.3)  # let each occupy slot/queue in order
            # slot busy + 2 queued: the next request must bounce
            resp = requests.post(
                f"{base}/chat",
                json={"query": "Q", "mode": "off", "approach": "rog"},
                timeout=10,
            )
            assert resp.status_code == 429
            gate.set()
            for th in threads:
                th.join(timeout=30)
            assert all(results[i] == 200 for i in range(3))


def test_second_chat_tokens_wait_for_first_done(fixture_kb):
    llm_app = make_llm_app(["tick ", "tock ", "end"], chunk_delay=0.25)
    with run_app(llm_app) as llm:
        _gated_llm_config(fixture_kb, llm.base_url)
        app = create_app(fixture_kb)
        with run_app(app) as handle:
            base = handle.base_url
            times: dict[str, list[tuple[str, float]]] = {"a": [], "b": []}

            def fire(name):
                with requests.post(
                    f"{base}/chat",
                    json={"query": "Q", "mode": "off", "approach": "rog"},
                    stream=True,
                    timeout=60,
                ) as resp:
                    assert resp.status_code == 200
                    event_name = "message"
                    for raw in resp.iter_lines(decode_unicode=True):
                        if raw and raw.startswith("event:"):
                            event_name = raw[len("event:") :].strip()
                        elif raw == "":
                            continue
                        elif raw and raw.startswith("data:"):
                            times[name].append((event_name, time.perf_counter()))

            ta = threading.Thread(target=fire, args=("a",))
            tb = threading.Thread(target=fire, args=("b",))
            ta.start()
            time.sleep(0.35)  # a holds the only slot by now
            tb.start()
            ta.join(timeout=30)
            tb.join(timeout=30)

    a_done = [t for name, t in times["a"] if name == "done"][0]
    b_first_token = [t for name, t in times["b"] if name == "token"][0]
    b_retrieval = [t for name, t in times["b"] if name == "retrieval"][0]
    assert b_retrieval < a_done  # admission/retrieval bypasses the queue
    assert b_first_token > a_done  # generation was serialized
