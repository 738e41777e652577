/** Chat transcript model: applies stream events, keeps the rendered text in
 * lockstep with what the server streamed. DOM-free so tests can drive it. */

import { ChatEvent, DoneInfo, RetrievalInfo } from "./api.js";

export interface Turn {
  query: string;
  retrieval: RetrievalInfo | null;
  tokens: string[];
  response: string;
  done: DoneInfo | null;
  error: string | null;
}

export type TurnListener = (turn: Turn) => void;

export class Transcript {
  turns: Turn[] = [];

  begin(query: string): Turn {
    const turn: Turn = {
      query,
      retrieval: null,
      tokens: [],
      response: "",
      done: null,
      error: null,
    };
    this.turns.push(turn);
    return turn;
  }

  /** Fold one stream event into the turn; returns the turn for chaining. */
  apply(turn: Turn, event: ChatEvent): Turn {
    switch (event.type) {
      case "retrieval":
        turn.retrieval = event.retrieval;
        break;
      case "token":
        turn.tokens.push(event.text);
        turn.response += event.text;
        break;
      case "done":
        turn.done = event.done;
        break;
      case "error":
        turn.error = `${event.code}: ${event.message}`;
        break;
    }
    return turn;
  }

  /** Drive a whole stream through the model, notifying after every event. */
  async consume(
    turn: Turn,
    events: AsyncGenerator<ChatEvent>,
    onUpdate?: TurnListener
  ): Promise<Turn> {
    for await (const event of events) {
      this.apply(turn, event);
      if (onUpdate) onUpdate(turn);
    }
    return turn;
  }
}
