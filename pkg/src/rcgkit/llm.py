"""Completion generation: a streaming HTTP client for completion-style
endpoints and a deterministic in-process stub for offline end-to-end tests.

The wire contract is POST {model, prompt, temperature, max_tokens, stream,
stop} answered as server-sent events whose `data:` payloads carry incremental
text chunks, terminated by `data: [DONE]`.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import dataclass
from typing import Iterator

import requests

from .errors import BudgetError, ConfigError, UpstreamError

AUTH_TOKEN_ENV = "RCGKIT_LLM_TOKEN"

_SENTENCE_RE = re.compile(r"[^.!?]*[.!?]", re.S)
_TRAILING_CUE_RE = re.compile(r"\n\s*\S{1,16}:\s*$")

# cue distinguishing the permissive (blend-allowed) instruction from strict ones
_PERMISSIVE_CUE = "You may use"
NO_KNOWLEDGE_PREFIX = "NO-KNOWLEDGE: "
BLEND_PREFIX = "KNOWLEDGE+PRIOR: "


@dataclass(frozen=True)
class LlmSpec:
    kind: str = "stub"  # "stub" | "remote"
    model_name: str = "stub"
    endpoint_url: str | None = None
    temperature: float = 0.0
    max_new_tokens: int = 512
    request_timeout_s: float = 60.0
    context_budget: int = 4096
    stop: str = "\n\n"
    max_retries: int = 3

    def __post_init__(self):
        if self.kind not in ("stub", "remote"):
            raise ConfigError(f"unknown llm kind {self.kind!r}")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_new_tokens < 1:
            raise ConfigError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.kind == "remote" and not self.endpoint_url:
            raise ConfigError("remote llm requires endpoint_url")


@dataclass(frozen=True)
class GenerationEvent:
    kind: str  # "token" | "done" | "error"
    text: str = ""
    finish_reason: str | None = None
    usage: dict | None = None
    code: str | None = None
    message: str | None = None

    @staticmethod
    def token(text: str) -> "GenerationEvent":
        return GenerationEvent(kind="token", text=text)

    @staticmethod
    def done(finish_reason: str, prompt_tokens_est: int, completion_tokens: int) -> "GenerationEvent":
        return GenerationEvent(
            kind="done",
            finish_reason=finish_reason,
            usage={"prompt_tokens_est": prompt_tokens_est, "completion_tokens": completion_tokens},
        )

    @staticmethod
    def error(code: str, message: str) -> "GenerationEvent":
        return GenerationEvent(kind="error", code=code, message=message)


def estimate_tokens(prompt: str) -> int:
    """Whitespace tokens x 1.3, rounded up; no tokenizer is bundled."""
    return math.ceil(len(prompt.split()) * 1.3)


def first_sentence(text: str) -> str:
    text = text.strip()
    m = _SENTENCE_RE.match(text)
    return m.group(0).strip() if m else text


def stub_generate(prompt: str, prefix_marker: str = '"', suffix_marker: str = '"') -> str:
    """Deterministic test double distinguishing the three prompting regimes.

    If knowledge is quoted between the retriever markers, echo its first
    sentence; when the trailing instruction is the permissive one, tag the
    echo with KNOWLEDGE+PRIOR so the blended path is distinguishable. With no
    markers (retrieval off), answer NO-KNOWLEDGE plus the first eight prompt
    tokens, ignoring a trailing assistant cue line such as "AI:".
    """
    start = prompt.find(prefix_marker)
    if start >= 0:
        inner_start = start + len(prefix_marker)
        end = prompt.find(suffix_marker, inner_start)
        if end >= 0:
            sentence = first_sentence(prompt[inner_start:end])
            tail = prompt[end + len(suffix_marker) :]
            if _PERMISSIVE_CUE in tail:
                return BLEND_PREFIX + sentence
            return sentence
    stripped = _TRAILING_CUE_RE.sub("", prompt)
    return NO_KNOWLEDGE_PREFIX + " ".join(stripped.split()[:8])


def _stub_stream(spec: LlmSpec, prompt: str, est: int) -> Iterator[GenerationEvent]:
    completion = stub_generate(prompt)
    matches = list(re.finditer(r"\S+\s*", completion))
    for m in matches:
        yield GenerationEvent.token(m.group(0))
    yield GenerationEvent.done("stop", est, len(matches))


def _chunk_text(payload: dict) -> str | None:
    """Pull incremental text out of a data chunk; accepts the common shapes."""
    if "choices" in payload and payload["choices"]:
        choice = payload["choices"][0]
        if "text" in choice:
            return choice["text"]
        delta = choice.get("delta") or {}
        return delta.get("content", "")
    if "text" in payload:
        return payload["text"]
    return None


def _remote_stream(spec: LlmSpec, prompt: str, est: int) -> Iterator[GenerationEvent]:
    body = {
        "model": spec.model_name,
        "prompt": prompt,
        "temperature": spec.temperature,
        "max_tokens": spec.max_new_tokens,
        "stream": True,
        "stop": spec.stop,
    }
    headers = {"Accept": "text/event-stream"}
    token = os.environ.get(AUTH_TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"

    resp = None
    last_exc: Exception | None = None
    for attempt in range(1, spec.max_retries + 1):
        try:
            resp = requests.post(
                spec.endpoint_url,
                json=body,
                headers=headers,
                stream=True,
                timeout=(min(spec.request_timeout_s, 10.0), spec.request_timeout_s),
            )
            resp.raise_for_status()
            break
        except requests.RequestException as exc:
            last_exc = exc
            resp = None
            if attempt < spec.max_retries:
                time.sleep(0.2 * (2 ** (attempt - 1)))
    if resp is None:
        yield GenerationEvent.error(
            "upstream",
            f"llm endpoint failed after {spec.max_retries} attempts: {last_exc}",
        )
        return

    completion_tokens = 0
    finish_reason = "stop"
    try:
        for raw in resp.iter_lines(decode_unicode=True):
            if not raw or not raw.startswith("data:"):
                continue
            data = raw[len("data:") :].strip()
            if data == "[DONE]":
                break
            try:
                payload = json.loads(data)
            except json.JSONDecodeError:
                yield GenerationEvent.error("protocol", f"malformed stream chunk: {data[:200]}")
                return
            text = _chunk_text(payload)
            if text is None:
                yield GenerationEvent.error("protocol", f"chunk without text field: {data[:200]}")
                return
            if payload.get("choices"):
                finish_reason = payload["choices"][0].get("finish_reason") or finish_reason
            if text:
                completion_tokens += 1
                yield GenerationEvent.token(text)
    except requests.RequestException as exc:
        # mid-stream stall or disconnect: not retryable without duplicating tokens
        yield GenerationEvent.error("timeout", f"stream interrupted: {exc}")
        return
    finally:
        resp.close()
    yield GenerationEvent.done(finish_reason, est, completion_tokens)


def generate_stream(spec: LlmSpec, prompt: str) -> Iterator[GenerationEvent]:
    """Stream a completion as token chunks followed by exactly one done/error.

    Raises BudgetError before any network traffic when the prompt estimate
    exceeds the context budget; the caller decides whether to shrink k or the
    EPW weight.
    """
    est = estimate_tokens(prompt)
    if est > spec.context_budget:
        raise BudgetError(est, spec.context_budget)
    if spec.kind == "stub":
        return _stub_stream(spec, prompt, est)
    return _remote_stream(spec, prompt, est)


def generate(spec: LlmSpec, prompt: str) -> str:
    """Non-streaming convenience: the concatenated token chunks."""
    parts = []
    for event in generate_stream(spec, prompt):
        if event.kind == "token":
            parts.append(event.text)
        elif event.kind == "error":
            raise UpstreamError(f"{event.code}: {event.message}")
    return "".join(parts)
