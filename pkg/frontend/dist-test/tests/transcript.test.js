import assert from "node:assert/strict";
import { test } from "node:test";
import { Transcript } from "../src/transcript.js";
async function* eventsOf(events) {
    for (const event of events)
        yield event;
}
const doneInfo = (response) => ({
    finish_reason: "stop",
    usage: null,
    response,
    latency_ms: { retrieve: 1, generate: 2, total: 3 },
});
test("tokens accumulate incrementally and final text matches done.response", async () => {
    const transcript = new Transcript();
    const turn = transcript.begin("q");
    const seen = [];
    await transcript.consume(turn, eventsOf([
        { type: "token", text: "Hel" },
        { type: "token", text: "lo " },
        { type: "token", text: "there" },
        { type: "done", done: doneInfo("Hello there") },
    ]), (t) => seen.push(t.response));
    assert.deepEqual(seen, ["Hel", "Hello ", "Hello there", "Hello there"]);
    assert.equal(turn.response, "Hello there");
    assert.equal(turn.response, turn.done?.response);
    assert.equal(turn.tokens.length, 3);
});
test("retrieval event lands before tokens and is retained", async () => {
    const transcript = new Transcript();
    const turn = transcript.begin("q");
    const retrieval = {
        mode: "manual",
        approach: "rcg",
        kb_id: "kb1",
        epw_weight: 100,
        hits: [{ passage_id: "p0", score: 0.9, rank: 1 }],
        tokens_retrieved: 10,
        tokens_injected: 10,
        retrieve_ms: 0.5,
    };
    await transcript.consume(turn, eventsOf([
        { type: "retrieval", retrieval },
        { type: "token", text: "x" },
        { type: "done", done: doneInfo("x") },
    ]));
    assert.deepEqual(turn.retrieval, retrieval);
});
test("error events mark the turn", async () => {
    const transcript = new Transcript();
    const turn = transcript.begin("q");
    await transcript.consume(turn, eventsOf([
        { type: "token", text: "par" },
        { type: "error", code: "timeout", message: "upstream stalled" },
    ]));
    assert.equal(turn.error, "timeout: upstream stalled");
    assert.equal(turn.response, "par");
    assert.equal(turn.done, null);
});
