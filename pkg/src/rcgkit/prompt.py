"""Five-slot prompt sets, fixed-order assembly, and named catalogs.

The final prompt is always the exact concatenation
    ai_prefix + retriever_prefix + knowledge + retriever_suffix
    + model_prefix + query + model_suffix
with no separators added: every byte of whitespace lives in the slots.
Catalogs persist as JSON because prompts are whitespace-sensitive and JSON
escapes newlines explicitly, round-tripping byte-exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import RcgError

SLOT_NAMES = ("ai_prefix", "retriever_prefix", "retriever_suffix", "model_prefix", "model_suffix")
BUILTIN_NAMES = ("rcg", "rag", "rog")


class CatalogError(RcgError):
    """Malformed or invalid prompt catalog content."""


@dataclass(frozen=True)
class PromptSet:
    ai_prefix: str = ""
    retriever_prefix: str = ""
    retriever_suffix: str = ""
    model_prefix: str = ""
    model_suffix: str = ""

    @classmethod
    def from_dict(cls, obj: dict, where: str = "prompt set") -> "PromptSet":
        if not isinstance(obj, dict):
            raise CatalogError(f"{where}: expected an object, got {type(obj).__name__}")
        unknown = set(obj) - set(SLOT_NAMES)
        if unknown:
            raise CatalogError(f"{where}: unknown fields {sorted(unknown)}")
        for key, value in obj.items():
            if not isinstance(value, str):
                raise CatalogError(f"{where}: slot {key!r} must be a string")
        return cls(**obj)


def assemble(ps: PromptSet, knowledge_text: str, query: str) -> str:
    """Exact seven-part concatenation; retrieval-off callers pass knowledge ''."""
    return (
        ps.ai_prefix
        + ps.retriever_prefix
        + knowledge_text
        + ps.retriever_suffix
        + ps.model_prefix
        + query
        + ps.model_suffix
    )


class PromptCatalog:
    """Ordered name -> PromptSet map; the rcg/rag/rog built-ins must exist."""

    def __init__(self, sets: dict[str, PromptSet]):
        missing = [n for n in BUILTIN_NAMES if n not in sets]
        if missing:
            raise CatalogError(f"catalog is missing built-in prompt sets: {missing}")
        self._sets = dict(sets)

    def __getitem__(self, name: str) -> PromptSet:
        if name not in self._sets:
            raise KeyError(f"no prompt set named {name!r} (have {sorted(self._sets)})")
        return self._sets[name]

    def __contains__(self, name: str) -> bool:
        return name in self._sets

    def names(self) -> list[str]:
        return list(self._sets)

    def set(self, name: str, ps: PromptSet) -> None:
        self._sets[name] = ps

    def reset_builtins(self) -> None:
        """Restore the built-in sets to their default contents."""
        for name in BUILTIN_NAMES:
            self._sets[name] = _DEFAULT_SETS[name]

    def to_dict(self) -> dict[str, dict[str, str]]:
        return {name: asdict(ps) for name, ps in self._sets.items()}

    @classmethod
    def from_dict(cls, obj: dict) -> "PromptCatalog":
        if not isinstance(obj, dict):
            raise CatalogError(f"catalog root must be an object, got {type(obj).__name__}")
        sets = {}
        for name, slots in obj.items():
            sets[name] = PromptSet.from_dict(slots, where=f"prompt set {name!r}")
        return cls(sets)


_DEFAULT_SETS = {
    # strict: the model must answer from the quoted knowledge
    "rcg": PromptSet(
        ai_prefix="",
        retriever_prefix='"',
        retriever_suffix='"\nanswer the following question with the provided knowledge.\n',
        model_prefix="",
        model_suffix="\nAI:",
    ),
    # permissive: retrieved knowledge is offered, model knowledge allowed
    "rag": PromptSet(
        ai_prefix="",
        retriever_prefix='"',
        retriever_suffix='"\nanswer the following question. You may use the provided knowledge.\n',
        model_prefix="",
        model_suffix="\nAI:",
    ),
    # retrieval off: bare query with the assistant cue
    "rog": PromptSet(model_suffix="\nAI:"),
    # stricter phrasing variants, kept as editable starting points
    "rcg-strict": PromptSet(
        retriever_prefix='"',
        retriever_suffix='"\nonly use the provided knowledge to answer the following question.\n',
        model_suffix="\nAI:",
    ),
    "rcg-persona": PromptSet(
        ai_prefix="you are a Retrieval-Centric AI. Knowledge below are provided.\n",
        retriever_prefix='"',
        retriever_suffix='"\nonly use the provided knowledge to answer the following question.\n',
        model_suffix="\nAI:",
    ),
    "rcg-persona-response": PromptSet(
        ai_prefix="you are a Retrieval-Centric AI. Knowledge below are provided.\n",
        retriever_prefix='"',
        retriever_suffix='"\nonly use the provided knowledge to answer the following question.\n',
        model_suffix="\nResponse:",
    ),
}


def builtin_defaults() -> PromptCatalog:
    return PromptCatalog(dict(_DEFAULT_SETS))


def save_catalog(catalog: PromptCatalog, path: str | Path) -> None:
    """Deterministic serialization: same catalog always yields the same bytes."""
    path = Path(path)
    data = json.dumps(catalog.to_dict(), ensure_ascii=False, indent=2)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data + "\n", encoding="utf-8")
    tmp.replace(path)


def load_catalog(path: str | Path) -> PromptCatalog:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CatalogError(
            f"malformed catalog {path}: {exc.msg} at line {exc.lineno} column {exc.colno}"
        ) from exc
    return PromptCatalog.from_dict(obj)
