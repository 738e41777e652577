/** Config tab: edit the tool configuration as JSON; server-side validation
 * errors render inline and a rejected save changes nothing. */
import { el } from "../dom.js";
export class ConfigTab {
    api;
    root;
    editor;
    statusEl;
    saveButton;
    reloadButton;
    constructor(api, readOnly) {
        this.api = api;
        this.editor = el("textarea", { class: "config-editor", rows: "28", spellcheck: "false" });
        this.statusEl = el("div", { class: "status" });
        this.saveButton = el("button", { class: "primary" }, "Validate and save");
        this.reloadButton = el("button", {}, "Reload");
        this.saveButton.addEventListener("click", () => void this.save());
        this.reloadButton.addEventListener("click", () => void this.load());
        this.root = el("section", { class: "tab config-tab" }, el("div", { class: "toolbar" }, this.saveButton, this.reloadButton), this.editor, this.statusEl);
        if (readOnly) {
            this.saveButton.disabled = true;
            this.editor.disabled = true;
        }
    }
    async load() {
        const config = await this.api.getConfig();
        this.editor.value = JSON.stringify(config, null, 2);
        this.statusEl.textContent = "";
    }
    async save() {
        let parsed;
        try {
            parsed = JSON.parse(this.editor.value);
        }
        catch (err) {
            this.statusEl.textContent = `not valid JSON: ${err}`;
            this.statusEl.classList.add("error");
            return;
        }
        try {
            await this.api.putConfig(parsed);
            this.statusEl.textContent = "saved and applied";
            this.statusEl.classList.remove("error");
        }
        catch (err) {
            this.statusEl.textContent = String(err);
            this.statusEl.classList.add("error");
        }
    }
}
