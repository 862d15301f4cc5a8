"""Skip-gram pretraining of user embeddings from truncated random walks.

Walks run over the undirected view of the trust graph (directed out-walks
dead-end at the many sink users, starving the corpus). Skip-gram with
negative sampling is trained on the walk sequences: for every center/context
pair within the window, the positive logit v_c . v'_o is pushed up and the
logits of ``negatives_per_target`` noise users (drawn proportionally to
corpus frequency^0.75) are pushed down, with a linearly decaying learning
rate. Two tables are trained; only the input-side table is exported.

Updates are applied in vectorized chunks (gradients within a chunk are
accumulated, then scatter-added once) so desk-scale graphs train in minutes
in pure numpy. Single-threaded and bit-deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError
from .graph import TrustGraph
from .numerics import DTYPE, sigmoid

_CHUNK_PAIRS = 1 << 17


@dataclass
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 40
    window: int = 5
    negatives_per_target: int = 5
    sg_lr: float = 0.025
    sg_lr_min: float = 1e-4
    sg_epochs: int = 5
    seed: int = 0

    def validate(self) -> None:
        counts = (
            self.walks_per_node, self.walk_length, self.window,
            self.negatives_per_target, self.sg_epochs,
        )
        if min(counts) < 1:
            raise DataError("all walk/skip-gram counts must be >= 1")
        if self.window >= self.walk_length:
            raise DataError(
                f"window ({self.window}) must be smaller than walk_length ({self.walk_length})"
            )
        if self.sg_lr <= 0 or self.sg_lr_min <= 0:
            raise DataError("learning rates must be positive")


@dataclass
class WalkCorpus:
    """Random-walk sequences of dense user ids."""

    walks: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.walks)

    def concatenated(self) -> tuple[np.ndarray, np.ndarray]:
        """All tokens in corpus order plus the walk index of each token."""
        lengths = np.fromiter((w.size for w in self.walks), dtype=np.int64, count=len(self.walks))
        tokens = np.concatenate(self.walks) if self.walks else np.empty(0, dtype=np.int32)
        walk_ids = np.repeat(np.arange(len(self.walks), dtype=np.int64), lengths)
        return tokens, walk_ids


def generate_walks(
    graph: TrustGraph, config: WalkConfig, rng: np.random.Generator
) -> WalkCorpus:
    """Run walks_per_node rounds of uniform random walks, one per user per round.

    Every round visits all users in a fresh shuffled order; each walk takes
    walk_length uniform steps over the undirected view. Users isolated in the
    undirected view yield length-1 walks. All walks of a round advance in
    lockstep, consuming one vector of random draws per step.
    """
    config.validate()
    neighbors, offsets, deg = graph.undirected_adjacency()
    n, length = graph.n, config.walk_length
    walks: list[np.ndarray] = []
    for _ in range(config.walks_per_node):
        starts = rng.permutation(n).astype(np.int32)
        mat = np.empty((n, length), dtype=np.int32)
        mat[:, 0] = starts
        for t in range(1, length):
            cur = mat[:, t - 1]
            dcur = deg[cur]
            pick = (rng.random(n) * dcur).astype(np.int64)
            nxt = neighbors[offsets[cur] + np.minimum(pick, np.maximum(dcur - 1, 0))]
            mat[:, t] = np.where(dcur > 0, nxt, cur)
        isolated = deg[starts] == 0
        for i in range(n):
            walks.append(mat[i, :1].copy() if isolated[i] else mat[i])
    return WalkCorpus(walks=walks)


def _noise_cdf(tokens: np.ndarray, n: int) -> np.ndarray:
    freq = np.bincount(tokens, minlength=n).astype(np.float64)
    weights = freq ** 0.75
    total = weights.sum()
    if total <= 0:
        raise DataError("skip-gram noise distribution is empty")
    return np.cumsum(weights / total)


def _count_pairs(walk_ids: np.ndarray, window: int) -> int:
    total = 0
    for k in range(1, window + 1):
        if k < walk_ids.size:
            total += 2 * int(np.sum(walk_ids[:-k] == walk_ids[k:]))
    return total


def _sgd_chunk(
    w_in: np.ndarray,
    w_out: np.ndarray,
    centers: np.ndarray,
    contexts: np.ndarray,
    noise_cdf: np.ndarray,
    rng: np.random.Generator,
    negatives: int,
    lr: float,
) -> None:
    v_c = w_in[centers]
    v_o = w_out[contexts]
    negs = np.searchsorted(noise_cdf, rng.random((centers.size, negatives))).astype(np.int64)
    v_n = w_out[negs]

    g_pos = (sigmoid(np.einsum("kd,kd->k", v_c, v_o)) - 1.0).astype(DTYPE)
    g_neg = sigmoid(np.einsum("knd,kd->kn", v_n, v_c)).astype(DTYPE)

    d_c = g_pos[:, None] * v_o + np.einsum("kn,knd->kd", g_neg, v_n)
    d_o = g_pos[:, None] * v_c
    d_n = g_neg[..., None] * v_c[:, None, :]

    np.add.at(w_in, centers, -lr * d_c)
    np.add.at(w_out, contexts, -lr * d_o)
    np.add.at(w_out, negs.ravel(), (-lr * d_n).reshape(-1, w_out.shape[1]))


def skipgram_train(
    corpus: WalkCorpus, n: int, d: int, config: WalkConfig, rng: np.random.Generator
) -> np.ndarray:
    """Train skip-gram with negative sampling on the corpus; returns the
    (n, d) float32 input-side embedding table."""
    config.validate()
    if not corpus.walks:
        raise DataError("skip-gram: empty corpus")
    tokens, walk_ids = corpus.concatenated()
    if tokens.size and int(tokens.max()) >= n:
        raise DataError(f"corpus contains id >= n ({n})")

    w_in = ((rng.random((n, d)) - 0.5) / d).astype(DTYPE)
    w_out = np.zeros((n, d), dtype=DTYPE)
    noise_cdf = _noise_cdf(tokens, n)

    total_updates = config.sg_epochs * _count_pairs(walk_ids, config.window)
    if total_updates == 0:
        return w_in
    done = 0
    for _ in range(config.sg_epochs):
        for k in range(1, config.window + 1):
            if k >= tokens.size:
                continue
            same_walk = walk_ids[:-k] == walk_ids[k:]
            left = tokens[:-k][same_walk]
            right = tokens[k:][same_walk]
            # both prediction directions for the offset-k pairs
            centers = np.concatenate([left, right]).astype(np.int64)
            contexts = np.concatenate([right, left]).astype(np.int64)
            for start in range(0, centers.size, _CHUNK_PAIRS):
                end = min(start + _CHUNK_PAIRS, centers.size)
                lr = max(config.sg_lr_min, config.sg_lr * (1.0 - done / total_updates))
                _sgd_chunk(
                    w_in, w_out, centers[start:end], contexts[start:end],
                    noise_cdf, rng, config.negatives_per_target, np.float32(lr),
                )
                done += end - start
    if not np.all(np.isfinite(w_in)):
        raise DataError("skip-gram produced non-finite embeddings")
    return w_in


def export_embeddings(table: np.ndarray, raw_ids: np.ndarray, path) -> None:
    """Write a text embedding file: header 'n d', then 'raw_id v1 .. vd' rows."""
    n, d = table.shape
    if raw_ids.shape[0] != n:
        raise DataError(f"{raw_ids.shape[0]} raw ids for {n} embedding rows")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for raw, row in zip(raw_ids, table):
            fh.write(f"{raw} " + " ".join(f"{v:.8e}" for v in row) + "\n")


def import_embeddings(path, graph: TrustGraph) -> np.ndarray:
    """Read an embedding file and remap rows to the graph's dense ids.

    Every graph user must be present (by raw id); missing users are an error
    reporting the count. Row count must match the header.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ParseError(1, f"expected header 'n d', got {header.strip()!r}")
        try:
            n_file, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(1, f"non-integer header {header.strip()!r}") from None
        rows: dict[int, np.ndarray] = {}
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != d + 1:
                raise ParseError(line_no, f"expected raw id + {d} floats, got {len(fields)} tokens")
            try:
                raw = int(fields[0])
                vec = np.asarray([float(v) for v in fields[1:]], dtype=DTYPE)
            except ValueError:
                raise ParseError(line_no, "non-numeric token") from None
            rows[raw] = vec
    if len(rows) != n_file:
        raise DataError(
            f"{path}: header declares {n_file} rows, file has {len(rows)} distinct users"
        )
    missing = sum(1 for raw in graph.raw_ids if int(raw) not in rows)
    if missing:
        raise DataError(f"{path}: {missing} of {graph.n} graph users missing from embedding file")
    out = np.empty((graph.n, d), dtype=DTYPE)
    for dense, raw in enumerate(graph.raw_ids):
        out[dense] = rows[int(raw)]
    return out
