/** Analysis tab: paged view of logged turns with similarity scores and
 * latency, plus log export. */
import { clear, el } from "../dom.js";
const PAGE = 20;
export class AnalysisTab {
    api;
    root;
    tableEl;
    pageLabel;
    statusEl;
    offset = 0;
    total = 0;
    constructor(api, readOnly) {
        this.api = api;
        this.tableEl = el("div", { class: "log-table" });
        this.pageLabel = el("span", { class: "page-label" });
        this.statusEl = el("div", { class: "status" });
        const prev = el("button", {}, "‹ newer");
        const next = el("button", {}, "older ›");
        const refresh = el("button", {}, "Refresh");
        const exportButton = el("button", {}, "Export log");
        prev.addEventListener("click", () => void this.page(-PAGE));
        next.addEventListener("click", () => void this.page(PAGE));
        refresh.addEventListener("click", () => void this.load());
        exportButton.addEventListener("click", () => void this.export());
        if (readOnly)
            exportButton.disabled = true;
        this.root = el("section", { class: "tab analysis-tab" }, el("div", { class: "toolbar" }, refresh, prev, this.pageLabel, next, exportButton), this.tableEl, this.statusEl);
    }
    async load() {
        const { records, total } = await this.api.getLog(this.offset, PAGE);
        this.total = total;
        this.render(records);
        const last = Math.min(this.offset + PAGE, total);
        this.pageLabel.textContent = total ? `${this.offset + 1}–${last} of ${total}` : "no records";
    }
    async page(delta) {
        this.offset = Math.max(0, Math.min(this.offset + delta, Math.max(0, this.total - 1)));
        await this.load();
    }
    render(records) {
        clear(this.tableEl);
        for (const rec of records) {
            const sims = rec.retrieved.map((hit, i) => {
                const s = rec.sentence_sim[i]?.toFixed(3) ?? "-";
                const t = rec.token_sim[i]?.toFixed(3) ?? "-";
                return `${hit.passage_id}: sent ${s} tok ${t}`;
            });
            this.tableEl.append(el("article", { class: "log-record" }, el("div", { class: "query" }, `${rec.mode}${rec.kb_id ? " · " + rec.kb_id : ""} · ${rec.query}`), el("div", { class: "response" }, rec.response), el("div", { class: "sims" }, sims.join("  |  ") || "no retrieval"), el("div", { class: "meta" }, `epw ${rec.epw_weight} · prompt ${rec.prompt_chars} chars · ` +
                `retrieve ${rec.latency_ms.retrieve.toFixed(1)} ms · ` +
                `generate ${rec.latency_ms.generate.toFixed(1)} ms`)));
        }
    }
    async export() {
        const path = `analysis_export_${Date.now()}.jsonl`;
        try {
            const out = await this.api.exportLog(path);
            this.statusEl.textContent = `exported to ${out.exported}`;
            this.statusEl.classList.remove("error");
        }
        catch (err) {
            this.statusEl.textContent = String(err);
            this.statusEl.classList.add("error");
        }
    }
}
