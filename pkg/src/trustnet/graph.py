"""Directed trust graph: edge-list ingestion, splits, degrees, negative sampling.

Users are remapped from raw file identifiers to dense indices 0..n-1 in order
of first appearance; the mapping is a bijection and travels with every
serialized artifact. Graphs are immutable after construction and safe for
concurrent read-only use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import DataError, ParseError, SamplingError
from .numerics import make_rng

DEGREE_THRESHOLD = 5
NEGATIVE_SAMPLE_CAP = 1000

LOW = "low"
HIGH = "high"


@dataclass
class ParsedEdgeList:
    """Raw (trustor, trustee) pairs in file order, plus skipped self-loop count."""

    pairs: list[tuple[int, int]]
    self_loops_skipped: int = 0


def _tokenize(line: str, line_no: int) -> list[str]:
    # one comma OR whitespace separates the two tokens
    if "," in line:
        parts = [p.strip() for p in line.split(",")]
    else:
        parts = line.split()
    if len(parts) != 2 or not all(parts):
        raise ParseError(line_no, f"expected two integer tokens, got {line.strip()!r}")
    return parts


def parse_edge_list(source: str | IO[str] | Iterable[str]) -> ParsedEdgeList:
    """Parse an edge list into raw (trustor, trustee) integer pairs.

    Accepts a string or any iterable of lines. Blank lines and lines starting
    with '#' are ignored. Self-loops are skipped and counted, not errors.
    Raises ParseError (with line number) on malformed lines.
    """
    if isinstance(source, str):
        lines: Iterable[str] = source.splitlines()
    else:
        lines = source
    pairs: list[tuple[int, int]] = []
    self_loops = 0
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = _tokenize(line, line_no)
        try:
            r, s = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(line_no, f"non-integer token in {stripped!r}") from None
        if r == s:
            self_loops += 1
            continue
        pairs.append((r, s))
    return ParsedEdgeList(pairs=pairs, self_loops_skipped=self_loops)


@dataclass
class TrustGraph:
    """Directed graph of users with positive trust edges.

    ``edges`` is an (m, 2) int32 array of dense (trustor, trustee) ids in
    first-appearance order, duplicates removed. Degree tables are computed on
    the full edge set.
    """

    n: int
    edges: np.ndarray
    raw_ids: np.ndarray          # dense id -> raw id, shape (n,), uint64
    in_degree: np.ndarray
    out_degree: np.ndarray
    duplicates_dropped: int = 0
    _edge_keys: np.ndarray = field(default=None, repr=False)  # sorted r*n+s
    _raw_to_dense: dict = field(default=None, repr=False)
    _out_adj: list = field(default=None, repr=False)
    _in_adj: list = field(default=None, repr=False)
    _und_adj: tuple = field(default=None, repr=False)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def raw_to_dense(self) -> dict:
        if self._raw_to_dense is None:
            self._raw_to_dense = {int(raw): i for i, raw in enumerate(self.raw_ids)}
        return self._raw_to_dense

    def encode_pairs(self, trustor: np.ndarray, trustee: np.ndarray) -> np.ndarray:
        return trustor.astype(np.int64) * self.n + trustee.astype(np.int64)

    def has_edge(self, trustor: int, trustee: int) -> bool:
        key = int(trustor) * self.n + int(trustee)
        i = np.searchsorted(self._edge_keys, key)
        return bool(i < self._edge_keys.size and self._edge_keys[i] == key)

    def has_edges(self, trustor: np.ndarray, trustee: np.ndarray) -> np.ndarray:
        """Vectorized membership test for ordered pairs of dense ids."""
        keys = self.encode_pairs(trustor, trustee)
        idx = np.searchsorted(self._edge_keys, keys)
        idx = np.minimum(idx, self._edge_keys.size - 1)
        return self._edge_keys[idx] == keys

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(s)) for r, s in self.edges}

    def _adjacency(self, column: int) -> list:
        order = np.argsort(self.edges[:, column], kind="stable")
        sorted_edges = self.edges[order]
        targets = sorted_edges[:, 1 - column]
        counts = np.bincount(sorted_edges[:, column], minlength=self.n)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        return [targets[offsets[u]:offsets[u + 1]] for u in range(self.n)]

    @property
    def out_adj(self) -> list:
        if self._out_adj is None:
            self._out_adj = self._adjacency(0)
        return self._out_adj

    @property
    def in_adj(self) -> list:
        if self._in_adj is None:
            self._in_adj = self._adjacency(1)
        return self._in_adj

    def undirected_adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat CSR-style (neighbors, offsets, degrees) of the undirected view.

        Reciprocal edges collapse to one undirected neighbor. Used by the
        random-walk pretrainer.
        """
        if self._und_adj is None:
            fwd = self.encode_pairs(self.edges[:, 0], self.edges[:, 1])
            rev = self.encode_pairs(self.edges[:, 1], self.edges[:, 0])
            keys = np.unique(np.concatenate([fwd, rev]))
            src = (keys // self.n).astype(np.int32)
            dst = (keys % self.n).astype(np.int32)
            deg = np.bincount(src, minlength=self.n).astype(np.int64)
            offsets = np.concatenate(([0], np.cumsum(deg)))
            self._und_adj = (dst, offsets, deg)
        return self._und_adj


def _assemble(
    n: int,
    edges: np.ndarray,
    raw_ids: np.ndarray,
    duplicates: int,
    raw_to_dense: dict | None,
) -> TrustGraph:
    return TrustGraph(
        n=n,
        edges=edges,
        raw_ids=raw_ids,
        in_degree=np.bincount(edges[:, 1], minlength=n).astype(np.int64),
        out_degree=np.bincount(edges[:, 0], minlength=n).astype(np.int64),
        duplicates_dropped=duplicates,
        _edge_keys=np.sort(edges[:, 0].astype(np.int64) * n + edges[:, 1]),
        _raw_to_dense=raw_to_dense,
    )


def build_graph(pairs: list[tuple[int, int]]) -> TrustGraph:
    """Build a TrustGraph from raw pairs: dense remapping, dedup, degree tables.

    Dense ids are assigned in order of first appearance (trustor before
    trustee within a pair). Duplicate edges are dropped and counted. Raw ids
    must be non-negative (they are serialized as u64 in every artifact).
    """
    if not pairs:
        raise DataError("cannot build a graph from an empty edge list")
    raw_to_dense: dict[int, int] = {}
    dense_pairs: list[tuple[int, int]] = []
    for r_raw, s_raw in pairs:
        if r_raw < 0 or s_raw < 0:
            raise DataError(f"negative raw user id in pair ({r_raw}, {s_raw})")
        r = raw_to_dense.setdefault(r_raw, len(raw_to_dense))
        s = raw_to_dense.setdefault(s_raw, len(raw_to_dense))
        dense_pairs.append((r, s))
    n = len(raw_to_dense)
    arr = np.asarray(dense_pairs, dtype=np.int64)
    keys = arr[:, 0] * n + arr[:, 1]
    _, first_idx = np.unique(keys, return_index=True)
    first_idx.sort()
    edges = arr[first_idx].astype(np.int32)
    duplicates = len(dense_pairs) - edges.shape[0]
    raw_ids = np.fromiter(raw_to_dense.keys(), dtype=np.uint64, count=n)
    return _assemble(n, edges, raw_ids, duplicates, raw_to_dense)


def graph_from_dense(n: int, edges, raw_ids: np.ndarray | None = None) -> TrustGraph:
    """Build a TrustGraph directly from dense-id edges on exactly ``n`` users.

    Unlike build_graph, users with no incident edge are retained (synthetic
    generators need the full user set). Raw ids default to the identity
    mapping. Self-loops are rejected; duplicates are dropped and counted.
    """
    if n < 1:
        raise DataError(f"need at least one user, got n={n}")
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise DataError("cannot build a graph with no edges")
    if arr.min() < 0 or arr.max() >= n:
        raise DataError(f"dense ids must lie in [0, {n})")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise DataError("self-loops are not allowed")
    keys = arr[:, 0] * n + arr[:, 1]
    _, first_idx = np.unique(keys, return_index=True)
    first_idx.sort()
    deduped = arr[first_idx].astype(np.int32)
    if raw_ids is None:
        raw_ids = np.arange(n, dtype=np.uint64)
    return _assemble(n, deduped, np.asarray(raw_ids, dtype=np.uint64),
                     arr.shape[0] - deduped.shape[0], None)


def write_edge_list(path, graph: TrustGraph, edges: np.ndarray | None = None) -> None:
    """Serialize edges (dense (k,2) array; defaults to all) as a raw-id edge list.

    Output re-parses to the identical edge set and, for the full graph, the
    identical first-appearance id mapping.
    """
    if edges is None:
        edges = graph.edges
    raw = graph.raw_ids
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# trustnet edge list: users={graph.n} edges={edges.shape[0]}\n")
        for r, s in edges:
            fh.write(f"{raw[r]} {raw[s]}\n")


def write_id_mapping(path, graph: TrustGraph) -> None:
    """Write the dense->raw id mapping, one 'dense raw' pair per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# dense_id raw_id\n")
        for dense, raw in enumerate(graph.raw_ids):
            fh.write(f"{dense} {raw}\n")


def load_graph(path) -> TrustGraph:
    """Parse and build a graph from an edge-list file."""
    with open(path, "r", encoding="utf-8") as fh:
        parsed = parse_edge_list(fh)
    return build_graph(parsed.pairs)


@dataclass
class EdgeSplit:
    """Disjoint train/test partition of a graph's edges (dense (k,2) arrays)."""

    train: np.ndarray
    test: np.ndarray
    ratio: float
    seed: int

    def train_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(s)) for r, s in self.train}

    def test_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(s)) for r, s in self.test}


def split_edges(graph: TrustGraph, ratio: float, seed: int) -> EdgeSplit:
    """Uniform random edge split: first round(ratio*|E|) of a seeded permutation train."""
    if not 0.0 < ratio < 1.0:
        raise DataError(f"split ratio must be in (0, 1), got {ratio}")
    rng = make_rng(seed)
    perm = rng.permutation(graph.num_edges)
    k = int(round(ratio * graph.num_edges))
    return EdgeSplit(
        train=graph.edges[perm[:k]], test=graph.edges[perm[k:]], ratio=ratio, seed=seed
    )


def sample_negative_pair(graph: TrustGraph, rng: np.random.Generator) -> tuple[int, int]:
    """Uniformly sample one ordered non-edge (r, s), r != s, by rejection.

    Raises SamplingError after NEGATIVE_SAMPLE_CAP rejected attempts
    (near-complete graphs make sampling infeasible).
    """
    for _ in range(NEGATIVE_SAMPLE_CAP):
        r, s = (int(v) for v in rng.integers(0, graph.n, size=2))
        if r != s and not graph.has_edge(r, s):
            return r, s
    raise SamplingError(
        f"no non-edge found in {NEGATIVE_SAMPLE_CAP} attempts; graph too dense"
    )


def sample_negative_pairs(
    graph: TrustGraph,
    rng: np.random.Generator,
    count: int,
    trustor_pool: np.ndarray | None = None,
    trustee_pool: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized rejection sampling of ``count`` ordered non-edges, (count, 2) int32.

    Endpoints are drawn uniformly from the optional pools (defaults: all
    users); rejected draws (self-pairs or existing edges) are resampled, so
    the result is uniform over admissible pairs. Same cap semantics as
    sample_negative_pair, applied per round of resampling.
    """
    if count == 0:
        return np.empty((0, 2), dtype=np.int32)
    out_r = np.empty(count, dtype=np.int32)
    out_s = np.empty(count, dtype=np.int32)
    filled = 0
    for _ in range(NEGATIVE_SAMPLE_CAP):
        need = count - filled
        if trustor_pool is None:
            r = rng.integers(0, graph.n, size=need).astype(np.int32)
        else:
            r = trustor_pool[rng.integers(0, trustor_pool.size, size=need)]
        if trustee_pool is None:
            s = rng.integers(0, graph.n, size=need).astype(np.int32)
        else:
            s = trustee_pool[rng.integers(0, trustee_pool.size, size=need)]
        ok = (r != s) & ~graph.has_edges(r, s)
        k = int(ok.sum())
        out_r[filled:filled + k] = r[ok]
        out_s[filled:filled + k] = s[ok]
        filled += k
        if filled == count:
            return np.stack([out_r, out_s], axis=1)
    raise SamplingError(
        f"could not sample {count} non-edges in {NEGATIVE_SAMPLE_CAP} rounds"
    )


def degree_class(degree: int, threshold: int = DEGREE_THRESHOLD) -> str:
    """Classify a degree as 'low' (strictly below threshold) or 'high'."""
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    return LOW if degree < threshold else HIGH
