/** Small element-construction helpers. */
export function el(tag, attrs = {}, ...children) {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        if (key === "class")
            node.className = value;
        else
            node.setAttribute(key, value);
    }
    node.append(...children);
    return node;
}
export function clear(node) {
    while (node.firstChild)
        node.removeChild(node.firstChild);
    return node;
}
/** Render whitespace visibly: newline pilcrows and space dots for prompt text. */
export function whitespaceMarkup(text) {
    return text.replace(/\n/g, "⏎\n").replace(/ /g, "·");
}
