/** Tuning-panel state: the single source of truth for the next chat request. */

export type RetrievalMode = "off" | "manual" | "mokb";

export interface TuningState {
  mode: RetrievalMode;
  approach: string;
  kbId: string | null;
  k: number;
  epwWeight: number;
}

export interface ChatRequestBody {
  query: string;
  mode: RetrievalMode;
  approach: string;
  kb_id?: string;
  k: number;
  epw_weight: number;
  stream: boolean;
}

export function defaultTuning(): TuningState {
  return { mode: "manual", approach: "rcg", kbId: null, k: 5, epwWeight: 100 };
}

/** Map the panel state onto the wire payload; every field the panel shows is
 * exactly what goes out. */
export function buildChatRequest(query: string, tuning: TuningState): ChatRequestBody {
  const body: ChatRequestBody = {
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
