"""Vector indexes over a knowledge base: exact flat search and an HNSW graph
built from scratch, with a shared binary persistence format.

Similarity is cosine throughout; vectors are stored normalized so scoring is
an inner product. HNSW internally works with distance = 1 - dot and returns
exact (recomputed) cosine scores for the ids it surfaces.

Index file layout (little-endian):
    magic "RCGX" | version u32 | kind u8 (0=flat, 1=hnsw, 2=reserved)
    dim u32 | count u64 | model_name (u32 length + UTF-8)
    hnsw only: M u32 | M0 u32 | ef_construction u32 | level_mult f64
               | seed u64 | entry_point i64 | max_level i32
    matrix: count*dim float32
    hnsw only: node levels (count u32), then per level L ascending, for each
               node with level >= L in id order: u64 list length + u64 ids
Row order maps 1:1 onto the passage store; ids are reattached on load.
"""

from __future__ import annotations

import heapq
import math
import random
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .embed import EmbeddingMatrix
from .errors import (
    FingerprintMismatchError,
    IndexFormatError,
    IndexTruncatedError,
    IndexVersionError,
)

MAGIC = b"RCGX"
FORMAT_VERSION = 1
KIND_FLAT = 0
KIND_HNSW = 1
KIND_IVFPQ_HNSW = 2  # reserved, never written

_HEADER_FMT = "<IBIQ"
_HNSW_PARAMS_FMT = "<IIIdQqi"

DEFAULT_M = 16
DEFAULT_EF_CONSTRUCTION = 200
DEFAULT_EF_SEARCH = 128


@dataclass(frozen=True)
class SearchHit:
    passage_id: str
    score: float
    rank: int


def _row_ids(matrix: EmbeddingMatrix) -> list[str]:
    if matrix.ids:
        if len(matrix.ids) != matrix.count:
            raise ValueError("matrix ids not aligned with rows")
        return list(matrix.ids)
    return [str(i) for i in range(matrix.count)]


def _check_dim(vecs: np.ndarray, query: np.ndarray) -> np.ndarray:
    query = np.asarray(query)
    if query.ndim != 1 or query.shape[0] != vecs.shape[1]:
        raise ValueError(f"query dim {query.shape} does not match index dim {vecs.shape[1]}")
    return query


def _hits_from_rows(ids: list[str], rows: Sequence[int], scores: Sequence[float]) -> list[SearchHit]:
    return [
        SearchHit(passage_id=ids[r], score=float(s), rank=i + 1)
        for i, (r, s) in enumerate(zip(rows, scores))
    ]


class FlatIndex:
    """Exact top-k by cosine; ties broken by ascending row id."""

    kind = KIND_FLAT

    def __init__(self, matrix: EmbeddingMatrix, model_name: str = ""):
        self._vecs = np.ascontiguousarray(matrix.vectors, dtype=np.float32).copy()
        self.ids = _row_ids(matrix)
        self.dim = matrix.dim
        self.model_name = model_name

    @property
    def count(self) -> int:
        return int(self._vecs.shape[0])

    @property
    def vectors(self) -> np.ndarray:
        return self._vecs

    def search(self, query: np.ndarray, k: int) -> list[SearchHit]:
        query = _check_dim(self._vecs, query)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        n = self.count
        if n == 0:
            return []
        k = min(k, n)
        # float64 scoring keeps ranking independent of BLAS kernel choice
        sims = self._vecs.astype(np.float64) @ query.astype(np.float64)
        order = np.lexsort((np.arange(n), -sims))[:k]
        return _hits_from_rows(self.ids, order.tolist(), sims[order].tolist())


class HnswIndex:
    """Hierarchical navigable small-world graph over the embedding matrix.

    Build inserts nodes one at a time: a seeded geometric level draw
    (multiplier 1/ln M), greedy descent through the upper layers, then an
    ef_construction-bounded candidate search plus the keep-if-closer-to-base
    neighbor-selection heuristic at each level at or below the node's own.
    Deterministic for a fixed seed and insertion order.
    """

    kind = KIND_HNSW

    def __init__(
        self,
        matrix: EmbeddingMatrix,
        M: int = DEFAULT_M,
        ef_construction: int = DEFAULT_EF_CONSTRUCTION,
        seed: int = 0,
        model_name: str = "",
        _defer_build: bool = False,
    ):
        if M < 2:
            raise ValueError(f"M must be >= 2, got {M}")
        if ef_construction < M:
            raise ValueError(f"ef_construction must be >= M, got {ef_construction}")
        self._vecs = np.ascontiguousarray(matrix.vectors, dtype=np.float32).copy()
        self.ids = _row_ids(matrix)
        self.dim = matrix.dim
        self.model_name = model_name
        self.M = M
        self.M0 = 2 * M
        self.ef_construction = ef_construction
        self.level_mult = 1.0 / math.log(M)
        self.seed = seed
        self.entry_point = -1
        self.max_level = -1
        # per node: list of adjacency lists, one per level 0..node_level
        self._graph: list[list[list[int]]] = []
        self._visit_stamp: list[int] = []
        self._visit_tag = 0
        if not _defer_build:
            self._build()

    @property
    def count(self) -> int:
        return int(self._vecs.shape[0])

    @property
    def vectors(self) -> np.ndarray:
        return self._vecs

    def node_level(self, node: int) -> int:
        return len(self._graph[node]) - 1

    def neighbors(self, node: int, level: int) -> list[int]:
        return self._graph[node][level]

    # -- construction -------------------------------------------------------

    def _build(self) -> None:
        rng = random.Random(self.seed)
        self._visit_stamp = [0] * self.count
        for node in range(self.count):
            level = int(-math.log(1.0 - rng.random()) * self.level_mult)
            self._insert(node, level)

    def _insert(self, node: int, level: int) -> None:
        self._graph.append([[] for _ in range(level + 1)])
        if self.entry_point < 0:
            self.entry_point = node
            self.max_level = level
            return

        q = self._vecs[node]
        ep = self.entry_point
        for lv in range(self.max_level, level, -1):
            ep = self._greedy_closest(q, ep, lv)

        eps: Sequence[int] = (ep,)
        for lv in range(min(level, self.max_level), -1, -1):
            candidates = self._search_layer(q, eps, self.ef_construction, lv)
            max_degree = self.M0 if lv == 0 else self.M
            selected = self._select_neighbors(q, candidates, self.M, keep_pruned=True)
            self._graph[node][lv] = selected
            for nb in selected:
                nb_links = self._graph[nb][lv]
                nb_links.append(node)
                if len(nb_links) > max_degree:
                    nb_vec = self._vecs[nb]
                    dists = 1.0 - self._vecs[nb_links] @ nb_vec
                    pruned = self._select_neighbors(
                        nb_vec, sorted(zip(dists.tolist(), nb_links)), max_degree
                    )
                    self._graph[nb][lv] = pruned
            eps = [c for _, c in candidates]

        if level > self.max_level:
            self.max_level = level
            self.entry_point = node

    def _select_neighbors(
        self,
        base: np.ndarray,
        candidates: list[tuple[float, int]],
        m: int,
        keep_pruned: bool = False,
    ) -> list[int]:
        """Keep candidates closer to the base than to any already-kept neighbor.

        With keep_pruned, leftover slots are filled with the nearest discarded
        candidates (denser graphs, better recall on unclustered data).
        """
        selected: list[int] = []
        sel_vecs: list[np.ndarray] = []
        discarded: list[int] = []
        for d, c in candidates:
            if len(selected) >= m:
                break
            cv = self._vecs[c]
            if sel_vecs:
                d_sel = 1.0 - np.stack(sel_vecs) @ cv
                if float(d_sel.min()) <= d:
                    if keep_pruned:
                        discarded.append(c)
                    continue
            selected.append(c)
            sel_vecs.append(cv)
        if keep_pruned:
            for c in discarded:
                if len(selected) >= m:
                    break
                selected.append(c)
        return selected

    # -- traversal ----------------------------------------------------------

    def _greedy_closest(self, q: np.ndarray, ep: int, level: int) -> int:
        cur = ep
        cur_d = 1.0 - float(np.dot(self._vecs[cur], q))
        improved = True
        while improved:
            improved = False
            nbrs = self._graph[cur][level]
            if not nbrs:
                break
            dists = 1.0 - self._vecs[nbrs] @ q
            best = int(np.argmin(dists))
            if float(dists[best]) < cur_d:
                cur = nbrs[best]
                cur_d = float(dists[best])
                improved = True
        return cur

    def _search_layer(
        self, q: np.ndarray, eps: Sequence[int], ef: int, level: int
    ) -> list[tuple[float, int]]:
        """Best-first search; returns up to ef (distance, id) sorted ascending."""
        self._visit_tag += 1
        tag = self._visit_tag
        stamp = self._visit_stamp
        vecs = self._vecs
        graph = self._graph

        cand: list[tuple[float, int]] = []
        result: list[tuple[float, int]] = []  # max-heap via negated distance
        for e in eps:
            d = 1.0 - float(np.dot(vecs[e], q))
            stamp[e] = tag
            heapq.heappush(cand, (d, e))
            heapq.heappush(result, (-d, e))

        while cand:
            d, c = heapq.heappop(cand)
            if d > -result[0][0] and len(result) >= ef:
                break
            fresh = [x for x in graph[c][level] if stamp[x] != tag]
            if not fresh:
                continue
            for x in fresh:
                stamp[x] = tag
            dists = 1.0 - vecs[fresh] @ q
            worst = -result[0][0]
            full = len(result) >= ef
            for x, dx in zip(fresh, dists.tolist()):
                if not full:
                    heapq.heappush(result, (-dx, x))
                    heapq.heappush(cand, (dx, x))
                    full = len(result) >= ef
                    worst = -result[0][0]
                elif dx < worst:
                    heapq.heapreplace(result, (-dx, x))
                    heapq.heappush(cand, (dx, x))
                    worst = -result[0][0]
        out = [(-nd, x) for nd, x in result]
        out.sort()
        return out

    def search(self, query: np.ndarray, k: int, ef_search: int = DEFAULT_EF_SEARCH) -> list[SearchHit]:
        query = _check_dim(self._vecs, query)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if ef_search < k:
            raise ValueError(f"ef_search must be >= k, got ef_search={ef_search}, k={k}")
        if self.count == 0 or self.entry_point < 0:
            return []
        k = min(k, self.count)
        q = np.asarray(query, dtype=np.float32)
        norm = float(np.linalg.norm(q))
        if norm > 0.0:
            q = q / norm
        ep = self.entry_point
        for lv in range(self.max_level, 0, -1):
            ep = self._greedy_closest(q, ep, lv)
        found = self._search_layer(q, (ep,), max(ef_search, k), 0)
        rows = [node for _, node in found]
        scores = self._vecs[rows].astype(np.float64) @ np.asarray(query, dtype=np.float64)
        ranked = sorted(zip(rows, scores.tolist()), key=lambda rs: (-rs[1], rs[0]))[:k]
        return _hits_from_rows(self.ids, [r for r, _ in ranked], [s for _, s in ranked])

    # -- structural checks (used by tests and reindex sanity) ----------------

    def check_graph(self) -> None:
        """Raise AssertionError on degree-bound or reachability violations."""
        n = self.count
        for node in range(n):
            for lv, links in enumerate(self._graph[node]):
                limit = self.M0 if lv == 0 else self.M
                assert len(links) <= limit, f"node {node} level {lv} degree {len(links)} > {limit}"
                for x in links:
                    assert 0 <= x < n and x != node, f"node {node} has invalid edge {x}"
        if n == 0:
            return
        seen = set()
        frontier = [self.entry_point]
        seen.add(self.entry_point)
        # descend from the entry point, accumulating reachability per level
        for lv in range(self.max_level, -1, -1):
            stack = [x for x in frontier if self.node_level(x) >= lv]
            while stack:
                cur = stack.pop()
                for nb in self._graph[cur][lv]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            frontier = list(seen)
        assert len(seen) == n, f"only {len(seen)}/{n} nodes reachable from entry point"


# -- construction entry points -----------------------------------------------


def build_flat(matrix: EmbeddingMatrix, model_name: str = "") -> FlatIndex:
    return FlatIndex(matrix, model_name=model_name)


def build_hnsw(
    matrix: EmbeddingMatrix,
    M: int = DEFAULT_M,
    ef_construction: int = DEFAULT_EF_CONSTRUCTION,
    seed: int = 0,
    model_name: str = "",
) -> HnswIndex:
    return HnswIndex(matrix, M=M, ef_construction=ef_construction, seed=seed, model_name=model_name)


def search_flat(index: FlatIndex, query: np.ndarray, k: int) -> list[SearchHit]:
    return index.search(query, k)


def search_hnsw(
    index: HnswIndex, query: np.ndarray, k: int, ef_search: int = DEFAULT_EF_SEARCH
) -> list[SearchHit]:
    return index.search(query, k, ef_search=ef_search)


def recall_at_k(
    approx: Sequence[SearchHit], exact: Sequence[SearchHit]
) -> float:
    """Fraction of the exact result ids recovered by the approximate result."""
    if not exact:
        return 1.0
    exact_ids = {h.passage_id for h in exact}
    got = sum(1 for h in approx if h.passage_id in exact_ids)
    return got / len(exact_ids)


# -- persistence --------------------------------------------------------------


def _write_model_name(fh: BinaryIO, name: str) -> None:
    data = name.encode("utf-8")
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def save_index(index: FlatIndex | HnswIndex, path: str | Path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(_HEADER_FMT, FORMAT_VERSION, index.kind, index.dim, index.count))
        _write_model_name(fh, index.model_name)
        if isinstance(index, HnswIndex):
            fh.write(
                struct.pack(
                    _HNSW_PARAMS_FMT,
                    index.M,
                    index.M0,
                    index.ef_construction,
                    index.level_mult,
                    index.seed,
                    index.entry_point,
                    index.max_level,
                )
            )
        fh.write(np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())
        if isinstance(index, HnswIndex):
            levels = np.array([index.node_level(i) for i in range(index.count)], dtype="<u4")
            fh.write(levels.tobytes())
            for lv in range(index.max_level + 1):
                for node in range(index.count):
                    if index.node_level(node) >= lv:
                        links = index.neighbors(node, lv)
                        fh.write(struct.pack("<Q", len(links)))
                        fh.write(np.array(links, dtype="<u8").tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise IndexTruncatedError(f"index file ended early (wanted {n} bytes, got {len(data)})")
    return data


def load_index(
    path: str | Path,
    passage_ids: Sequence[str] | None = None,
    expected_model_name: str | None = None,
) -> FlatIndex | HnswIndex:
    """Load an index file; optionally reattach passage ids (row order) and
    verify the embedder fingerprint recorded at build time."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise IndexFormatError(f"bad magic {magic!r}, not an index file")
        version, kind, dim, count = struct.unpack(_HEADER_FMT, _read_exact(fh, struct.calcsize(_HEADER_FMT)))
        if version != FORMAT_VERSION:
            raise IndexVersionError(f"unsupported format version {version}")
        if kind not in (KIND_FLAT, KIND_HNSW):
            raise IndexFormatError(f"unsupported index kind {kind}")
        (name_len,) = struct.unpack("<I", _read_exact(fh, 4))
        model_name = _read_exact(fh, name_len).decode("utf-8")
        if expected_model_name is not None and model_name != expected_model_name:
            raise FingerprintMismatchError(
                f"index built with embedder {model_name!r}, configured {expected_model_name!r}"
            )
        params = (
            struct.unpack(_HNSW_PARAMS_FMT, _read_exact(fh, struct.calcsize(_HNSW_PARAMS_FMT)))
            if kind == KIND_HNSW
            else None
        )
        vec_bytes = _read_exact(fh, count * dim * 4)
        vectors = np.frombuffer(vec_bytes, dtype="<f4").reshape(count, dim).copy()
        ids = list(passage_ids) if passage_ids is not None else []
        if ids and len(ids) != count:
            raise ValueError(f"passage_ids length {len(ids)} != index count {count}")
        matrix = EmbeddingMatrix(dim=dim, vectors=vectors, ids=ids)

        if kind == KIND_FLAT:
            return FlatIndex(matrix, model_name=model_name)

        M, M0, ef_construction, level_mult, seed, entry_point, max_level = params
        index = HnswIndex(
            matrix,
            M=M,
            ef_construction=ef_construction,
            seed=seed,
            model_name=model_name,
            _defer_build=True,
        )
        index.level_mult = level_mult
        index.entry_point = entry_point
        index.max_level = max_level
        if count:
            levels = np.frombuffer(_read_exact(fh, count * 4), dtype="<u4")
            index._graph = [[[] for _ in range(int(lv) + 1)] for lv in levels]
            for lv in range(max_level + 1):
                for node in range(count):
                    if int(levels[node]) >= lv:
                        (n_links,) = struct.unpack("<Q", _read_exact(fh, 8))
                        links = np.frombuffer(_read_exact(fh, n_links * 8), dtype="<u8")
                        index._graph[node][lv] = [int(x) for x in links]
        index._visit_stamp = [0] * count
        return index
