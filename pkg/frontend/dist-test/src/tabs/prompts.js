/** Prompt tab: edit the five slots of any catalog entry with whitespace made
 * visible; save writes the whole catalog back byte-exactly. */
import { clear, el, whitespaceMarkup } from "../dom.js";
const SLOTS = [
    "ai_prefix",
    "retriever_prefix",
    "retriever_suffix",
    "model_prefix",
    "model_suffix",
];
export class PromptsTab {
    api;
    readOnly;
    root;
    catalog = {};
    setSelect;
    editors = new Map();
    previews = new Map();
    statusEl;
    saveButton;
    resetButton;
    constructor(api, readOnly) {
        this.api = api;
        this.readOnly = readOnly;
        this.setSelect = el("select");
        this.statusEl = el("div", { class: "status" });
        this.saveButton = el("button", { class: "primary" }, "Save catalog");
        this.resetButton = el("button", {}, "Reset built-ins to defaults");
        const fields = el("div", { class: "prompt-fields" });
        for (const slot of SLOTS) {
            const area = el("textarea", { rows: "3", spellcheck: "false" });
            const preview = el("pre", { class: "ws-preview" });
            this.editors.set(slot, area);
            this.previews.set(slot, preview);
            area.addEventListener("input", () => {
                this.stash(slot, area.value);
                preview.textContent = whitespaceMarkup(area.value);
            });
            fields.append(el("label", { class: "slot" }, slot.replace("_", " "), area, preview));
        }
        this.setSelect.addEventListener("change", () => this.showSet(this.setSelect.value));
        this.saveButton.addEventListener("click", () => void this.save());
        this.resetButton.addEventListener("click", () => void this.resetDefaults());
        this.root = el("section", { class: "tab prompts-tab" }, el("div", { class: "toolbar" }, el("label", {}, "prompt set ", this.setSelect), this.saveButton, this.resetButton), fields, this.statusEl);
        if (readOnly) {
            this.saveButton.disabled = true;
            this.resetButton.disabled = true;
            for (const area of this.editors.values())
                area.disabled = true;
        }
    }
    async load() {
        this.catalog = await this.api.getPrompts();
        clear(this.setSelect);
        for (const name of Object.keys(this.catalog)) {
            this.setSelect.append(el("option", { value: name }, name));
        }
        this.showSet(this.setSelect.value);
    }
    showSet(name) {
        const ps = this.catalog[name];
        if (!ps)
            return;
        for (const slot of SLOTS) {
            const area = this.editors.get(slot);
            area.value = ps[slot];
            this.previews.get(slot).textContent = whitespaceMarkup(ps[slot]);
        }
    }
    stash(slot, value) {
        const name = this.setSelect.value;
        if (this.catalog[name])
            this.catalog[name][slot] = value;
    }
    async save() {
        try {
            await this.api.putPrompts(this.catalog);
            this.statusEl.textContent = "saved";
            this.statusEl.classList.remove("error");
        }
        catch (err) {
            this.statusEl.textContent = String(err);
            this.statusEl.classList.add("error");
        }
    }
    async resetDefaults() {
        const defaults = await this.api.getPromptDefaults();
        for (const [name, ps] of Object.entries(defaults)) {
            this.catalog[name] = ps;
        }
        this.showSet(this.setSelect.value);
        await this.save();
    }
}
