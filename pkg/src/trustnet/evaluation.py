"""Evaluation: the two complementary metrics, repeated negative sampling,
degree-segmented breakdowns, and the synthetic block-model test substrate.

Positive-only test data supports only recall, reported here as "accuracy
without negatives" (fraction of held-out trust edges predicted as trust).
Precision and F-score require negatives: each run samples as many fresh
non-edges as there are test positives (a balanced set), and the mean and
standard deviation over runs are reported.

Degree classes are computed on the full graph (train + test edges). Segment
negatives are sampled so both endpoints' degree classes match the segment,
so per-segment F-scores measure within-segment discrimination.

Any object with a ``predict_batch(trustor, trustee) -> 0/1 array`` method can
be evaluated.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graph import (
    DEGREE_THRESHOLD,
    HIGH,
    LOW,
    TrustGraph,
    graph_from_dense,
    sample_negative_pairs,
)

VIEW_IN = "indegree"
VIEW_OUT = "outdegree"

SegmentKey = tuple[str, str, str]  # (view, trustor_class, trustee_class)


@dataclass
class RunCounts:
    """Confusion counts of one balanced evaluation run (trust = positive class)."""

    tp: int
    fp: int
    fn: int
    tn: int

    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    def fscore(self) -> float:
        p, r = self.precision(), self.recall()
        return 2.0 * p * r / (p + r) if p + r else 0.0


@dataclass
class MetricReport:
    """Aggregate of the two metrics over negative-resampling runs."""

    runs: int
    n_pairs: int
    accuracy_no_neg: float
    precision_mean: float
    recall_mean: float
    fscore_mean: float
    fscore_std: float
    per_run: list[RunCounts]

    @classmethod
    def from_counts(cls, counts: list[RunCounts], n_pairs: int) -> "MetricReport":
        f = np.asarray([c.fscore() for c in counts], dtype=np.float64)
        return cls(
            runs=len(counts),
            n_pairs=n_pairs,
            accuracy_no_neg=float(np.mean([c.recall() for c in counts])),
            precision_mean=float(np.mean([c.precision() for c in counts])),
            recall_mean=float(np.mean([c.recall() for c in counts])),
            fscore_mean=float(f.mean()),
            fscore_std=float(f.std()),  # population std: runs=1 reports 0
            per_run=counts,
        )


def accuracy_without_negatives(model, test_positives: np.ndarray) -> float:
    """Fraction of held-out positive pairs predicted as trust (equals recall)."""
    if test_positives.shape[0] == 0:
        raise DataError("accuracy_without_negatives: empty test set")
    labels = model.predict_batch(test_positives[:, 0], test_positives[:, 1])
    return float(np.mean(labels == 1))


def fscore_with_negatives(
    model,
    test_positives: np.ndarray,
    graph: TrustGraph,
    runs: int = 10,
    rng: np.random.Generator | None = None,
    trustor_pool: np.ndarray | None = None,
    trustee_pool: np.ndarray | None = None,
    threads: int = 1,
) -> MetricReport:
    """Balanced-set precision/recall/F over ``runs`` fresh negative samples.

    Each run draws |test_positives| non-edges (optionally restricted to
    endpoint pools), so the evaluation set is exactly balanced. Per-run RNG
    streams are spawned up front, making the report independent of
    ``threads``.
    """
    m = int(test_positives.shape[0])
    if m == 0:
        raise DataError("fscore_with_negatives: empty test set")
    if runs < 1:
        raise DataError(f"runs must be >= 1, got {runs}")
    rng = rng if rng is not None else np.random.default_rng(0)
    pos_labels = model.predict_batch(test_positives[:, 0], test_positives[:, 1])
    tp = int(np.sum(pos_labels == 1))
    fn = m - tp
    run_rngs = rng.spawn(runs)

    def one_run(child: np.random.Generator) -> RunCounts:
        negatives = sample_negative_pairs(graph, child, m, trustor_pool, trustee_pool)
        neg_labels = model.predict_batch(negatives[:, 0], negatives[:, 1])
        fp = int(np.sum(neg_labels == 1))
        return RunCounts(tp=tp, fp=fp, fn=fn, tn=m - fp)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(one_run, run_rngs))
    else:
        counts = [one_run(child) for child in run_rngs]
    return MetricReport.from_counts(counts, n_pairs=m)


def segment_test_pairs(
    test_pairs: np.ndarray,
    graph: TrustGraph,
    view: str,
    threshold: int = DEGREE_THRESHOLD,
) -> dict[SegmentKey, np.ndarray]:
    """Partition test pairs into the four High/Low x High/Low segments.

    The degree used for both endpoints is the one named by ``view``
    (indegree or outdegree), computed on the full graph.
    """
    deg = _view_degrees(graph, view)
    trustor_high = deg[test_pairs[:, 0]] >= threshold
    trustee_high = deg[test_pairs[:, 1]] >= threshold
    segments: dict[SegmentKey, np.ndarray] = {}
    for r_high, r_cls in ((True, HIGH), (False, LOW)):
        for s_high, s_cls in ((True, HIGH), (False, LOW)):
            mask = (trustor_high == r_high) & (trustee_high == s_high)
            segments[(view, r_cls, s_cls)] = test_pairs[mask]
    return segments


def _view_degrees(graph: TrustGraph, view: str) -> np.ndarray:
    if view == VIEW_IN:
        return graph.in_degree
    if view == VIEW_OUT:
        return graph.out_degree
    raise DataError(f"unknown view {view!r}; expected {VIEW_IN!r} or {VIEW_OUT!r}")


def segment_report(
    model,
    test_positives: np.ndarray,
    graph: TrustGraph,
    view: str,
    runs: int = 10,
    rng: np.random.Generator | None = None,
    threshold: int = DEGREE_THRESHOLD,
    threads: int = 1,
) -> dict[SegmentKey, MetricReport | None]:
    """Both metrics per degree segment, with degree-class-matched negatives.

    Segments with no positive test pairs report None rather than failing.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    deg = _view_degrees(graph, view)
    pools = {
        HIGH: np.where(deg >= threshold)[0].astype(np.int32),
        LOW: np.where(deg < threshold)[0].astype(np.int32),
    }
    out: dict[SegmentKey, MetricReport | None] = {}
    for key, pairs in segment_test_pairs(test_positives, graph, view, threshold).items():
        if pairs.shape[0] == 0:
            out[key] = None
            continue
        _, r_cls, s_cls = key
        out[key] = fscore_with_negatives(
            model, pairs, graph, runs=runs, rng=rng,
            trustor_pool=pools[r_cls], trustee_pool=pools[s_cls], threads=threads,
        )
    return out


# ---------------------------------------------------------------------------
# Report formatting (CSV + aligned text table)
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["view", "segment", "accuracy", "f_mean", "f_std", "precision", "recall", "n_pairs"]


def report_rows(
    overall: MetricReport,
    segments: dict[SegmentKey, MetricReport | None] | None = None,
) -> list[dict]:
    """Flatten reports into CSV-ready rows (overall first, then segments)."""
    def row(view: str, segment: str, rep: MetricReport | None) -> dict:
        if rep is None:
            return {c: "" for c in CSV_COLUMNS} | {"view": view, "segment": segment, "n_pairs": 0}
        return {
            "view": view,
            "segment": segment,
            "accuracy": f"{rep.accuracy_no_neg:.6f}",
            "f_mean": f"{rep.fscore_mean:.6f}",
            "f_std": f"{rep.fscore_std:.6f}",
            "precision": f"{rep.precision_mean:.6f}",
            "recall": f"{rep.recall_mean:.6f}",
            "n_pairs": rep.n_pairs,
        }

    rows = [row("overall", "all", overall)]
    for (view, r_cls, s_cls), rep in (segments or {}).items():
        rows.append(row(view, f"{r_cls}-{s_cls}", rep))
    return rows


def write_report_csv(path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def format_report_table(rows: list[dict]) -> str:
    """Aligned text rendering of the CSV rows."""
    table = [CSV_COLUMNS] + [[str(r[c]) for c in CSV_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(CSV_COLUMNS))]
    out = io.StringIO()
    for i, row in enumerate(table):
        out.write("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n")
        if i == 0:
            out.write("  ".join("-" * w for w in widths) + "\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Synthetic block-model graphs (test oracle substrate)
# ---------------------------------------------------------------------------

def make_synthetic_block_graph(
    block_sizes: list[int], p_in: float, p_out: float, seed: int
) -> TrustGraph:
    """Directed stochastic block model over the given block sizes.

    Every ordered pair (u, v), u != v, is an edge with probability p_in when
    u and v share a block and p_out otherwise. All sum(block_sizes) users are
    present even when isolated; dense ids run block by block.
    """
    if not (0.0 <= p_out < p_in <= 1.0):
        raise DataError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if not block_sizes or min(block_sizes) < 1:
        raise DataError("block sizes must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    starts = np.concatenate(([0], np.cumsum(block_sizes)))
    chunks: list[np.ndarray] = []
    for a, na in enumerate(block_sizes):
        for b, nb in enumerate(block_sizes):
            p = p_in if a == b else p_out
            n_possible = na * (nb - 1) if a == b else na * nb
            if n_possible == 0 or p == 0.0:
                continue
            count = int(rng.binomial(n_possible, p))
            if count == 0:
                continue
            idx = _sample_distinct(n_possible, count, rng)
            if a == b:
                u = idx // (na - 1)
                rem = idx % (na - 1)
                v = rem + (rem >= u)
            else:
                u = idx // nb
                v = idx % nb
            chunks.append(np.stack([u + starts[a], v + starts[b]], axis=1))
    if not chunks:
        raise DataError("block model produced no edges; increase sizes or p_in")
    return graph_from_dense(int(starts[-1]), np.concatenate(chunks))


def make_synthetic_two_community_graph(
    n_per_block: int, p_in: float, p_out: float, seed: int
) -> TrustGraph:
    """Two equal blocks of the directed stochastic block model."""
    if n_per_block < 2:
        raise DataError(f"n_per_block must be >= 2, got {n_per_block}")
    return make_synthetic_block_graph([n_per_block, n_per_block], p_in, p_out, seed)


def _sample_distinct(n_total: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k distinct integers from [0, n_total), uniform, via over-draw + dedup."""
    if k > n_total:
        raise DataError(f"cannot sample {k} distinct values from {n_total}")
    chosen = np.unique(rng.integers(0, n_total, size=k))
    while chosen.size < k:
        extra = rng.integers(0, n_total, size=2 * (k - chosen.size) + 8)
        chosen = np.unique(np.concatenate([chosen, extra]))
    if chosen.size > k:
        chosen = np.sort(rng.permutation(chosen)[:k])
    return chosen
