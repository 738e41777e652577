/** Typed client for the rcgkit HTTP API. DOM-free. */

import { parseSse } from "./sse.js";
import { ChatRequestBody } from "./state.js";

export interface PromptSet {
  ai_prefix: string;
  retriever_prefix: string;
  retriever_suffix: string;
  model_prefix: string;
  model_suffix: string;
}

export type PromptCatalog = Record<string, PromptSet>;

export interface KbInfo {
  kb_id: string;
  name: string;
  description: string;
  passages: number;
  dim: number;
  index_kind: string;
}

export interface RetrievalHit {
  passage_id: string;
  score: number;
  rank: number;
}

export interface RetrievalInfo {
  mode: string;
  approach: string;
  kb_id: string | null;
  epw_weight: number;
  hits: RetrievalHit[];
  tokens_retrieved: number;
  tokens_injected: number;
  retrieve_ms: number;
}

export interface DoneInfo {
  finish_reason: string;
  usage: { prompt_tokens_est: number; completion_tokens: number } | null;
  response: string;
  latency_ms: { retrieve: number; generate: number; total: number };
}

export type ChatEvent =
  | { type: "retrieval"; retrieval: RetrievalInfo }
  | { type: "token"; text: string }
  | { type: "done"; done: DoneInfo }
  | { type: "error"; code: string; message: string };

export interface StatusInfo {
  version: string;
  read_only: boolean;
  kb_count: number;
  queued: number;
}

export interface LogRecord {
  timestamp: number;
  mode: string;
  kb_id: string | null;
  query: string;
  retrieved: { passage_id: string; score: number; text: string }[];
  epw_weight: number;
  prompt_chars: number;
  response: string;
  sentence_sim: number[];
  token_sim: number[];
  latency_ms: { retrieve: number; generate: number; total: number };
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function orThrow(resp: Response): Promise<Response> {
  if (!resp.ok) {
    let detail = `HTTP ${resp.status}`;
    try {
      const body = await resp.json();
      detail = body.detail ?? body.message ?? JSON.stringify(body);
    } catch {
      /* plain-text error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return resp;
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = globalThis.fetch.bind(globalThis)
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await orThrow(await this.fetchFn(`${this.base}${path}`));
    return (await resp.json()) as T;
  }

  private async sendJson<T>(method: string, path: string, body: unknown): Promise<T> {
    const resp = await orThrow(
      await this.fetchFn(`${this.base}${path}`, {
        method,
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      })
    );
    return (await resp.json()) as T;
  }

  status(): Promise<StatusInfo> {
    return this.getJson("/status");
  }

  listKbs(): Promise<{ knowledge_bases: KbInfo[] }> {
    return this.getJson("/kb");
  }

  getPrompts(): Promise<PromptCatalog> {
    return this.getJson("/prompts");
  }

  putPrompts(catalog: PromptCatalog): Promise<{ saved: boolean }> {
    return this.sendJson("PUT", "/prompts", catalog);
  }

  getPromptDefaults(): Promise<PromptCatalog> {
    return this.getJson("/prompts/defaults");
  }

  getConfig(): Promise<Record<string, unknown>> {
    return this.getJson("/config");
  }

  putConfig(config: Record<string, unknown>): Promise<{ saved: boolean }> {
    return this.sendJson("PUT", "/config", config);
  }

  getLog(offset = 0, limit = 50): Promise<{ records: LogRecord[]; total: number }> {
    return this.getJson(`/analysis/log?offset=${offset}&limit=${limit}`);
  }

  exportLog(path: string): Promise<{ exported: string }> {
    return this.sendJson("POST", "/analysis/export", { path });
  }

  /** POST /chat and yield typed events as the stream arrives. */
  async *streamChat(body: ChatRequestBody): AsyncGenerator<ChatEvent> {
    const resp = await orThrow(
      await this.fetchFn(`${this.base}/chat`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      })
    );
    if (!resp.body) throw new ApiError(0, "response has no body stream");
    for await (const frame of parseSse(resp.body)) {
      const data = JSON.parse(frame.data);
      switch (frame.event) {
        case "retrieval":
          yield { type: "retrieval", retrieval: data as RetrievalInfo };
          break;
        case "token":
          yield { type: "token", text: data.text as string };
          break;
        case "done":
          yield { type: "done", done: data as DoneInfo };
          break;
        case "error":
          yield { type: "error", code: data.code, message: data.message };
          break;
        default:
          break; // ignore unknown event kinds
      }
    }
  }
}
