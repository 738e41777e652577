/** Typed client for the rcgkit HTTP API. DOM-free. */
import { parseSse } from "./sse.js";
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
async function orThrow(resp) {
    if (!resp.ok) {
        let detail = `HTTP ${resp.status}`;
        try {
            const body = await resp.json();
            detail = body.detail ?? body.message ?? JSON.stringify(body);
        }
        catch {
            /* plain-text error body */
        }
        throw new ApiError(resp.status, detail);
    }
    return resp;
}
export class ApiClient {
    base;
    fetchFn;
    constructor(base = "", fetchFn = globalThis.fetch.bind(globalThis)) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    async getJson(path) {
        const resp = await orThrow(await this.fetchFn(`${this.base}${path}`));
        return (await resp.json());
    }
    async sendJson(method, path, body) {
        const resp = await orThrow(await this.fetchFn(`${this.base}${path}`, {
            method,
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
        }));
        return (await resp.json());
    }
    status() {
        return this.getJson("/status");
    }
    listKbs() {
        return this.getJson("/kb");
    }
    getPrompts() {
        return this.getJson("/prompts");
    }
    putPrompts(catalog) {
        return this.sendJson("PUT", "/prompts", catalog);
    }
    getPromptDefaults() {
        return this.getJson("/prompts/defaults");
    }
    getConfig() {
        return this.getJson("/config");
    }
    putConfig(config) {
        return this.sendJson("PUT", "/config", config);
    }
    getLog(offset = 0, limit = 50) {
        return this.getJson(`/analysis/log?offset=${offset}&limit=${limit}`);
    }
    exportLog(path) {
        return this.sendJson("POST", "/analysis/export", { path });
    }
    /** POST /chat and yield typed events as the stream arrives. */
    async *streamChat(body) {
        const resp = await orThrow(await this.fetchFn(`${this.base}/chat`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
        }));
        if (!resp.body)
            throw new ApiError(0, "response has no body stream");
        for await (const frame of parseSse(resp.body)) {
            const data = JSON.parse(frame.data);
            switch (frame.event) {
                case "retrieval":
                    yield { type: "retrieval", retrieval: data };
                    break;
                case "token":
                    yield { type: "token", text: data.text };
                    break;
                case "done":
                    yield { type: "done", done: data };
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
