/** Chat transcript model: applies stream events, keeps the rendered text in
 * lockstep with what the server streamed. DOM-free so tests can drive it. */
export class Transcript {
    turns = [];
    begin(query) {
        const turn = {
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
    apply(turn, event) {
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
    async consume(turn, events, onUpdate) {
        for await (const event of events) {
            this.apply(turn, event);
            if (onUpdate)
                onUpdate(turn);
        }
        return turn;
    }
}
