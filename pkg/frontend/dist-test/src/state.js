/** Tuning-panel state: the single source of truth for the next chat request. */
export function defaultTuning() {
    return { mode: "manual", approach: "rcg", kbId: null, k: 5, epwWeight: 100 };
}
/** Map the panel state onto the wire payload; every field the panel shows is
 * exactly what goes out. */
export function buildChatRequest(query, tuning) {
    const body = {
        query,
        mode: tuning.mode,
        approach: tuning.approach,
        k: tuning.k,
        epw_weight: tuning.epwWeight,
        stream: true,
    };
    if (tuning.mode === "manual" && tuning.kbId) {
        body.kb_id = tuning.kbId;
    }
    return body;
}
