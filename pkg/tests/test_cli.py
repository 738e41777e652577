import subprocess
import sys
from pathlib import Path

import yaml

from conftest import write_config

CLI = [sys.executable, "-m", "rcgkit.cli"]


def run_cli(args, cwd) -> subprocess.CompletedProcess:
    return subprocess.run(
        CLI + args, cwd=cwd, capture_output=True, text=True, timeout=300
    )


def prepare_fixture(tmp_path, corpus_dir) -> Path:
    config = write_config(tmp_path / "config.yaml")
    proc = run_cli(
        [
            "prepare",
            "--input",
            str(corpus_dir),
            "--out",
            "kb",
            "--config",
            "config.yaml",
            "--kb-id",
            "fixture",
            "--description",
            "field guides about bees, tides, and volcanoes",
        ],
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    return config


# -- prepare ------------------------------------------------------------------


def test_prepare_reports_counts(tmp_path, corpus_dir):
    config = write_config(tmp_path / "config.yaml")
    proc = run_cli(
        ["prepare", "--input", str(corpus_dir), "--out", "kb", "--config", "config.yaml"],
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    # 3 fixture documents; 97+99 words fit one 128-word chunk each, 173 words
    # split into two chunks at stride 112 -> 4 passages
    assert "documents: 3" in proc.stdout
    assert "passages: 4" in proc.stdout
    assert "dim: 64" in proc.stdout
    assert "index: hnsw" in proc.stdout
    assert not (tmp_path / "kb" / "index.rcgx.partial").exists()


def test_prepare_registers_kb_in_config(tmp_path, corpus_dir):
    config = prepare_fixture(tmp_path, corpus_dir)
    cfg = yaml.safe_load(config.read_text())
    (entry,) = cfg["knowledge_bases"]
    assert entry["kb_id"] == "fixture"
    assert entry["passage_store"] == "kb/passages.jsonl"
    assert entry["index"] == "kb/index.rcgx"


def test_prepare_twice_byte_identical_index(tmp_path, corpus_dir):
    write_config(tmp_path / "config.yaml")
    for out in ("kb1", "kb2"):
        proc = run_cli(
            ["prepare", "--input", str(corpus_dir), "--out", out, "--config", "config.yaml"],
            cwd=tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "kb1" / "index.rcgx").read_bytes() == (
        tmp_path / "kb2" / "index.rcgx"
    ).read_bytes()
    assert (tmp_path / "kb1" / "passages.jsonl").read_bytes() == (
        tmp_path / "kb2" / "passages.jsonl"
    ).read_bytes()


# -- query ----------------------------------------------------------------------


def test_query_three_approaches_distinct(tmp_path, corpus_dir):
    prepare_fixture(tmp_path, corpus_dir)
    q = "how do honey bees communicate in the hive?"
    out = {}
    for approach in ("rcg", "rag", "rog"):
        proc = run_cli(
            ["query", "--config", "config.yaml", "--approach", approach, "--q", q],
            cwd=tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        out[approach] = proc.stdout

    assert "Honey bees communicate through dances that encode distance and direction." in out["rcg"]
    assert "KNOWLEDGE+PRIOR:" in out["rag"]
    assert "NO-KNOWLEDGE: how do honey bees communicate in the" in out["rog"]
    assert len({out["rcg"], out["rag"], out["rog"]}) == 3
    assert "kb: fixture" in out["rcg"]
    assert "retrieval: off" in out["rog"]


def test_query_rerun_byte_identical(tmp_path, corpus_dir):
    prepare_fixture(tmp_path, corpus_dir)
    args = ["query", "--config", "config.yaml", "--approach", "rcg", "--q", "spring tides and the moon"]
    first = run_cli(args, cwd=tmp_path)
    second = run_cli(args, cwd=tmp_path)
    assert first.returncode == second.returncode == 0
    assert first.stdout == second.stdout


def test_query_epw_flag(tmp_path, corpus_dir):
    prepare_fixture(tmp_path, corpus_dir)
    proc = run_cli(
        [
            "query", "--config", "config.yaml", "--approach", "rcg",
            "--q", "volcano eruption warning signs", "--epw", "50", "--k", "2",
        ],
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    trace = [line for line in proc.stdout.splitlines() if line.startswith("tokens:")][0]
    retrieved = int(trace.split("retrieved=")[1].split()[0])
    injected = int(trace.split("injected=")[1].split()[0])
    assert injected < retrieved


# -- eval -----------------------------------------------------------------------


def test_eval_reports_and_files(tmp_path, corpus_dir):
    prepare_fixture(tmp_path, corpus_dir)
    proc = run_cli(
        [
            "eval", "--config", "config.yaml",
            "--approaches", "rog,rag,rcg", "--epw-sweep", "10:90:10",
            "--out-dir", "eval_out",
        ],
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    for tag in ("ROG", "RAG", "RCG", "RCG-EPW-10", "RCG-EPW-90"):
        assert tag in proc.stdout
    rows = (tmp_path / "eval_out" / "rows.tsv").read_text().splitlines()
    header, body = rows[0], rows[1:]
    assert header.split("\t") == ["approach", "query", "response", "rouge_l_f1", "time_s", "error"]
    assert len(body) == 12 * 10  # 3 approaches + 9 sweep points, 10 pairs each
    assert (tmp_path / "eval_out" / "summary.tsv").exists()
    assert (tmp_path / "eval_out" / "rouge_l.png").stat().st_size > 0
    assert (tmp_path / "eval_out" / "time_per_query.png").stat().st_size > 0


def test_eval_deterministic_content(tmp_path, corpus_dir):
    prepare_fixture(tmp_path, corpus_dir)

    def run_once(out_dir):
        proc = run_cli(
            ["eval", "--config", "config.yaml", "--approaches", "rog,rcg", "--out-dir", out_dir],
            cwd=tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        rows = (tmp_path / out_dir / "rows.tsv").read_text().splitlines()
        # drop the wall-clock column; responses and scores must be identical
        return ["\t".join(r.split("\t")[:4]) for r in rows]

    assert run_once("run1") == run_once("run2")


# -- exit codes ------------------------------------------------------------------


def test_exit_code_usage_error(tmp_path):
    proc = run_cli(["query", "--config", "c.yaml"], cwd=tmp_path)  # missing --q
    assert proc.returncode == 1


def test_exit_code_config_error(tmp_path):
    proc = run_cli(
        ["query", "--config", "missing.yaml", "--approach", "rog", "--q", "hi"], cwd=tmp_path
    )
    assert proc.returncode == 2
    assert "config error" in proc.stderr


def test_exit_code_upstream_error(tmp_path, corpus_dir):
    config = prepare_fixture(tmp_path, corpus_dir)
    cfg = yaml.safe_load(config.read_text())
    cfg["llm"] = {
        "kind": "remote",
        "endpoint_url": "http://127.0.0.1:9/v1/completions",
        "max_retries": 1,
        "request_timeout_s": 2,
    }
    config.write_text(yaml.safe_dump(cfg))
    proc = run_cli(
        ["query", "--config", "config.yaml", "--approach", "rcg", "--q", "bees"], cwd=tmp_path
    )
    assert proc.returncode == 3
    assert "upstream error" in proc.stderr
