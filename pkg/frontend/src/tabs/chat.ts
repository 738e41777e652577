/** Chat tab: query box, streaming transcript, and the retrieval tuning panel. */

import { ApiClient, KbInfo } from "../api.js";
import { clear, el } from "../dom.js";
import { buildChatRequest, RetrievalMode, TuningState } from "../state.js";
import { Transcript, Turn } from "../transcript.js";

export class ChatTab {
  readonly root: HTMLElement;
  readonly tuning: TuningState;
  private transcript = new Transcript();
  private transcriptEl: HTMLElement;
  private kbSelect: HTMLSelectElement;
  private approachSelect: HTMLSelectElement;
  private modeSelect: HTMLSelectElement;
  private epwSlider: HTMLInputElement;
  private epwValue: HTMLElement;
  private kStepper: HTMLInputElement;
  private input: HTMLTextAreaElement;
  private sendButton: HTMLButtonElement;
  private busy = false;

  constructor(private api: ApiClient, tuning: TuningState) {
    this.tuning = tuning;
    this.transcriptEl = el("div", { class: "transcript" });
    this.kbSelect = el("select");
    this.approachSelect = el("select");
    this.modeSelect = el("select");
    for (const mode of ["manual", "mokb", "off"]) {
      this.modeSelect.append(el("option", { value: mode }, mode));
    }
    this.epwSlider = el("input", {
      type: "range", min: "0", max: "100", step: "1", value: String(tuning.epwWeight),
    });
    this.epwValue = el("span", { class: "epw-value" }, String(tuning.epwWeight));
    this.kStepper = el("input", { type: "number", min: "1", max: "50", value: String(tuning.k) });
    this.input = el("textarea", { rows: "2", placeholder: "ask something…" });
    this.sendButton = el("button", { class: "primary" }, "Send");

    this.modeSelect.value = tuning.mode;
    this.wirePanel();

    const panel = el(
      "div",
      { class: "tuning-panel" },
      el("label", {}, "mode ", this.modeSelect),
      el("label", {}, "knowledge base ", this.kbSelect),
      el("label", {}, "prompt set ", this.approachSelect),
      el("label", {}, "EPW ", this.epwSlider, this.epwValue),
      el("label", {}, "k ", this.kStepper)
    );
    const composer = el("div", { class: "composer" }, this.input, this.sendButton);
    this.root = el("section", { class: "tab chat-tab" }, panel, this.transcriptEl, composer);

    this.sendButton.addEventListener("click", () => void this.submit());
    this.input.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" && !ev.shiftKey) {
        ev.preventDefault();
        void this.submit();
      }
    });
  }

  private wirePanel(): void {
    this.modeSelect.addEventListener("change", () => {
      this.tuning.mode = this.modeSelect.value as RetrievalMode;
      this.kbSelect.disabled = this.tuning.mode !== "manual";
    });
    this.kbSelect.addEventListener("change", () => {
      this.tuning.kbId = this.kbSelect.value || null;
    });
    this.approachSelect.addEventListener("change", () => {
      this.tuning.approach = this.approachSelect.value;
    });
    this.epwSlider.addEventListener("input", () => {
      this.tuning.epwWeight = Number(this.epwSlider.value);
      this.epwValue.textContent = this.epwSlider.value;
    });
    this.kStepper.addEventListener("change", () => {
      this.tuning.k = Math.max(1, Number(this.kStepper.value) || 1);
      this.kStepper.value = String(this.tuning.k);
    });
  }

  async load(): Promise<void> {
    const [kbs, prompts] = await Promise.all([this.api.listKbs(), this.api.getPrompts()]);
    this.populateKbs(kbs.knowledge_bases);
    this.populateApproaches(Object.keys(prompts));
  }

  populateKbs(kbs: KbInfo[]): void {
    clear(this.kbSelect);
    for (const kb of kbs) {
      this.kbSelect.append(el("option", { value: kb.kb_id }, `${kb.name} (${kb.passages})`));
    }
    if (kbs.length && !this.tuning.kbId) this.tuning.kbId = kbs[0].kb_id;
    if (this.tuning.kbId) this.kbSelect.value = this.tuning.kbId;
  }

  populateApproaches(names: string[]): void {
    clear(this.approachSelect);
    for (const name of names) {
      this.approachSelect.append(el("option", { value: name }, name));
    }
    if (names.includes(this.tuning.approach)) this.approachSelect.value = this.tuning.approach;
  }

  async submit(): Promise<void> {
    const query = this.input.value.trim();
    if (!query || this.busy) return;
    this.busy = true;
    this.sendButton.disabled = true;
    this.input.value = "";
    const turn = this.transcript.begin(query);
    const card = this.renderTurn(turn);
    this.transcriptEl.append(card);
    try {
      const body = buildChatRequest(query, this.tuning);
      await this.transcript.consume(turn, this.api.streamChat(body), () =>
        this.updateTurn(card, turn)
      );
    } catch (err) {
      turn.error = String(err);
      this.updateTurn(card, turn);
    } finally {
      this.busy = false;
      this.sendButton.disabled = false;
    }
  }

  private renderTurn(turn: Turn): HTMLElement {
    const card = el(
      "article",
      { class: "turn" },
      el("div", { class: "query" }, turn.query),
      el("div", { class: "trace" }),
      el("div", { class: "response" }),
      el("div", { class: "meta" })
    );
    return card;
  }

  private updateTurn(card: HTMLElement, turn: Turn): void {
    const trace = card.querySelector(".trace") as HTMLElement;
    const response = card.querySelector(".response") as HTMLElement;
    const meta = card.querySelector(".meta") as HTMLElement;
    if (turn.retrieval && !trace.childElementCount) {
      const r = turn.retrieval;
      const hits = r.hits
        .map((h) => `#${h.rank} ${h.passage_id} (${h.score.toFixed(3)})`)
        .join("  ");
      trace.append(
        el(
          "div",
          {},
          r.kb_id
            ? `kb ${r.kb_id} · tokens ${r.tokens_injected}/${r.tokens_retrieved} · ${hits}`
            : "retrieval off"
        )
      );
    }
    response.textContent = turn.response;
    if (turn.error) {
      meta.textContent = turn.error;
      meta.classList.add("error");
    } else if (turn.done) {
      meta.textContent = `${turn.done.finish_reason} · ${turn.done.latency_ms.total.toFixed(0)} ms`;
    }
  }
}
