/** Console shell: four tabs over the rcgkit API, rebuilt entirely from the
 * server on refresh (no authoritative client state). */
import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { defaultTuning } from "./state.js";
import { AnalysisTab } from "./tabs/analysis.js";
import { ChatTab } from "./tabs/chat.js";
import { ConfigTab } from "./tabs/config.js";
import { PromptsTab } from "./tabs/prompts.js";
async function boot() {
    const api = new ApiClient("");
    const app = document.getElementById("app");
    clear(app);
    let readOnly = false;
    try {
        const status = await api.status();
        readOnly = status.read_only;
    }
    catch (err) {
        app.append(el("div", { class: "banner error" }, `cannot reach the server: ${err}`));
        return;
    }
    if (readOnly) {
        app.append(el("div", { class: "banner" }, "read-only deployment: prompts, config, reindex, and eval are disabled"));
    }
    const chat = new ChatTab(api, defaultTuning());
    const prompts = new PromptsTab(api, readOnly);
    const config = new ConfigTab(api, readOnly);
    const analysis = new AnalysisTab(api, readOnly);
    const tabs = [
        ["Chat", chat],
        ["Prompts", prompts],
        ["Config", config],
        ["Analysis", analysis],
    ];
    const nav = el("nav", { class: "tabs" });
    const body = el("main", {});
    app.append(nav, body);
    const buttons = new Map();
    async function show(name) {
        const entry = tabs.find(([n]) => n === name);
        for (const [n, button] of buttons)
            button.classList.toggle("active", n === name);
        clear(body);
        body.append(entry[1].root);
        await entry[1].load();
    }
    for (const [name] of tabs) {
        const button = el("button", {}, name);
        button.addEventListener("click", () => void show(name));
        buttons.set(name, button);
        nav.append(button);
    }
    await show("Chat");
}
void boot();
