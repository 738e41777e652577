/** Config tab: edit the tool configuration as JSON; server-side validation
 * errors render inline and a rejected save changes nothing. */

import { ApiClient } from "../api.js";
import { el } from "../dom.js";

export class ConfigTab {
  readonly root: HTMLElement;
  private editor: HTMLTextAreaElement;
  private statusEl: HTMLElement;
  private saveButton: HTMLButtonElement;
  private reloadButton: HTMLButtonElement;

  constructor(private api: ApiClient, readOnly: boolean) {
    this.editor = el("textarea", { class: "config-editor", rows: "28", spellcheck: "false" });
    this.statusEl = el("div", { class: "status" });
    this.saveButton = el("button", { class: "primary" }, "Validate and save");
    this.reloadButton = el("button", {}, "Reload");
    this.saveButton.addEventListener("click", () => void this.save());
    this.reloadButton.addEventListener("click", () => void this.load());
    this.root = el(
      "section",
      { class: "tab config-tab" },
      el("div", { class: "toolbar" }, this.saveButton, this.reloadButton),
      this.editor,
      this.statusEl
    );
    if (readOnly) {
      this.saveButton.disabled = true;
      this.editor.disabled = true;
    }
  }

  async load(): Promise<void> {
    const config = await this.api.getConfig();
    this.editor.value = JSON.stringify(config, null, 2);
    this.statusEl.textContent = "";
  }

  private async save(): Promise<void> {
    let parsed: Record<string, unknown>;
    try {
      parsed = JSON.parse(this.editor.value);
    } catch (err) {
      this.statusEl.textContent = `not valid JSON: ${err}`;
      this.statusEl.classList.add("error");
      return;
    }
    try {
      await this.api.putConfig(parsed);
      this.statusEl.textContent = "saved and applied";
      this.statusEl.classList.remove("error");
    } catch (err) {
      this.statusEl.textContent = String(err);
      this.statusEl.classList.add("error");
    }
  }
}
