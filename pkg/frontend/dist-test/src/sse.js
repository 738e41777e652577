/** Server-sent events parsing over a byte stream. DOM-free. */
function parseFrame(block) {
    let event = "message";
    const dataLines = [];
    for (const rawLine of block.split(/\r?\n/)) {
        if (rawLine.startsWith("event:")) {
            event = rawLine.slice("event:".length).trim();
        }
        else if (rawLine.startsWith("data:")) {
            dataLines.push(rawLine.slice("data:".length).trimStart());
        }
        // comment lines (":keepalive") and unknown fields are ignored
    }
    if (dataLines.length === 0)
        return null;
    return { event, data: dataLines.join("\n") };
}
/** Yield frames as they complete; tolerates chunk boundaries anywhere. */
export async function* parseSse(stream) {
    const reader = stream.getReader();
    const decoder = new TextDecoder("utf-8");
    let buffer = "";
    try {
        while (true) {
            const { value, done } = await reader.read();
            if (done)
                break;
            buffer += decoder.decode(value, { stream: true });
            let split;
            while ((split = buffer.search(/\r?\n\r?\n/)) >= 0) {
                const block = buffer.slice(0, split);
                buffer = buffer.slice(split).replace(/^\r?\n\r?\n/, "");
                const frame = parseFrame(block);
                if (frame)
                    yield frame;
            }
        }
        buffer += decoder.decode();
        if (buffer.trim()) {
            const frame = parseFrame(buffer);
            if (frame)
                yield frame;
        }
    }
    finally {
        reader.releaseLock();
    }
}
