"""The single YAML config file shared by the CLI and the server.

Paths inside the file resolve relative to the file's own directory so a
knowledge-base directory can be moved or checked in wholesale. Parsing is
strict: unknown keys are errors, and loading a config into a live registry
validates embedder/index dimensions before anything is swapped in.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .embed import EmbedderSpec
from .errors import ConfigError
from .ingest import SplitterConfig
from .llm import LlmSpec


@dataclass(frozen=True)
class KbEntry:
    kb_id: str
    name: str
    description: str
    passage_store: str
    index: str


@dataclass(frozen=True)
class ServerSettings:
    port: int = 8512
    queue_capacity: int = 32
    max_concurrent_generations: int = 1

    def __post_init__(self):
        if self.queue_capacity < 0:
            raise ConfigError("queue_capacity must be >= 0")
        if self.max_concurrent_generations < 1:
            raise ConfigError("max_concurrent_generations must be >= 1")


@dataclass(frozen=True)
class RetrievalDefaults:
    k: int = 5
    epw_weight: int = 100
    ef_search: int = 128
    mode: str = "manual"
    approach: str = "rcg"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("defaults.k must be >= 1")
        if not 0 <= self.epw_weight <= 100:
            raise ConfigError("defaults.epw_weight must be in [0, 100]")
        if self.mode not in ("off", "manual", "mokb"):
            raise ConfigError(f"defaults.mode must be off/manual/mokb, got {self.mode!r}")


@dataclass(frozen=True)
class IndexSettings:
    kind: str = "hnsw"  # "hnsw" | "flat"
    M: int = 16
    ef_construction: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("hnsw", "flat"):
            raise ConfigError(f"index.kind must be hnsw or flat, got {self.kind!r}")


def _build(cls, obj: dict, where: str):
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(obj) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class ToolConfig:
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    llm: LlmSpec = field(default_factory=LlmSpec)
    knowledge_bases: list[KbEntry] = field(default_factory=list)
    splitter: SplitterConfig = field(default_factory=SplitterConfig)
    index: IndexSettings = field(default_factory=IndexSettings)
    server: ServerSettings = field(default_factory=ServerSettings)
    defaults: RetrievalDefaults = field(default_factory=RetrievalDefaults)
    prompt_catalog: str | None = None
    analysis_log: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    _SECTIONS = (
        "embedder",
        "llm",
        "knowledge_bases",
        "splitter",
        "index",
        "server",
        "defaults",
        "prompt_catalog",
        "analysis_log",
    )

    def resolve(self, path_str: str) -> Path:
        p = Path(path_str)
        return p if p.is_absolute() else self.base_dir / p

    @classmethod
    def from_dict(cls, obj: dict, base_dir: str | Path | None = None) -> "ToolConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config root must be a mapping")
        unknown = set(obj) - set(cls._SECTIONS)
        if unknown:
            raise ConfigError(f"config: unknown sections {sorted(unknown)}")
        kbs_raw = obj.get("knowledge_bases") or []
        if not isinstance(kbs_raw, list):
            raise ConfigError("knowledge_bases: expected a list")
        kbs = [_build(KbEntry, kb, f"knowledge_bases[{i}]") for i, kb in enumerate(kbs_raw)]
        seen = set()
        for kb in kbs:
            if kb.kb_id in seen:
                raise ConfigError(f"duplicate kb_id {kb.kb_id!r}")
            seen.add(kb.kb_id)
        try:
            embedder = _build(EmbedderSpec, obj.get("embedder"), "embedder")
            llm = _build(LlmSpec, obj.get("llm"), "llm")
        except ConfigError:
            raise
        cfg = cls(
            embedder=embedder,
            llm=llm,
            knowledge_bases=kbs,
            splitter=_build(SplitterConfig, obj.get("splitter"), "splitter"),
            index=_build(IndexSettings, obj.get("index"), "index"),
            server=_build(ServerSettings, obj.get("server"), "server"),
            defaults=_build(RetrievalDefaults, obj.get("defaults"), "defaults"),
            prompt_catalog=obj.get("prompt_catalog"),
            analysis_log=obj.get("analysis_log"),
        )
        if base_dir is not None:
            cfg.base_dir = Path(base_dir)
        return cfg

    def to_dict(self) -> dict:
        return {
            "embedder": asdict(self.embedder),
            "llm": asdict(self.llm),
            "knowledge_bases": [asdict(kb) for kb in self.knowledge_bases],
            "splitter": asdict(self.splitter),
            "index": asdict(self.index),
            "server": asdict(self.server),
            "defaults": asdict(self.defaults),
            "prompt_catalog": self.prompt_catalog,
            "analysis_log": self.analysis_log,
        }

    @classmethod
    def load(cls, path: str | Path) -> "ToolConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            obj = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if obj is None:
            obj = {}
        return cls.from_dict(obj, base_dir=path.parent)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        text = yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
