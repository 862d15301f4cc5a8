"""Command-line surface: ingest, pretrain, train, eval, predict.

Every subcommand is deterministic given its flags (seeds included) and input
file digests, and leaves a JSON manifest beside each produced artifact with
enough information to re-run it. Exit codes are a stable contract:
0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .deepwalk import WalkConfig, export_embeddings, generate_walks, import_embeddings, skipgram_train
from .errors import DataError, NumericError, TrustNetError
from .evaluation import (
    VIEW_IN,
    VIEW_OUT,
    accuracy_without_negatives,
    format_report_table,
    fscore_with_negatives,
    report_rows,
    segment_report,
    segment_test_pairs,
    write_report_csv,
)
from .graph import build_graph, load_graph, parse_edge_list, split_edges, write_edge_list, write_id_mapping
from .model import ARCH_JOINT, ARCH_SIMPLE, TrainConfig, TrustModel, train
from .numerics import make_rng


class UsageError(TrustNetError):
    pass


class _Parser(argparse.ArgumentParser):
    # spec exit-code contract: usage errors are 1, not argparse's default 2
    def error(self, message):
        raise UsageError(message)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_path, command: str, args_snapshot: dict, inputs: list, outputs: list, elapsed: float) -> None:
    manifest = {
        "tool": f"trustnet {__version__}",
        "command": command,
        "config": args_snapshot,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "elapsed_seconds": round(elapsed, 3),
    }
    with open(str(out_path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("TRUSTNET_THREADS", "1")))


def cmd_ingest(args) -> int:
    started = time.monotonic()
    with open(args.edges, "r", encoding="utf-8") as fh:
        parsed = parse_edge_list(fh)
    graph = build_graph(parsed.pairs)
    write_edge_list(args.out, graph)
    write_id_mapping(str(args.out) + ".ids", graph)
    mean_degree = graph.num_edges / graph.n
    print(f"users={graph.n} edges={graph.num_edges} mean_degree={mean_degree:.2f}")
    print(
        f"self_loops_skipped={parsed.self_loops_skipped} "
        f"duplicates_dropped={graph.duplicates_dropped}"
    )
    print(f"graph sha256={sha256_file(args.out)}")
    _write_manifest(
        args.out, "ingest", {"edges": str(args.edges)},
        inputs=[args.edges], outputs=[args.out, str(args.out) + ".ids"],
        elapsed=time.monotonic() - started,
    )
    return 0


def cmd_pretrain(args) -> int:
    started = time.monotonic()
    graph = load_graph(args.graph)
    config = WalkConfig(
        walks_per_node=args.walks, walk_length=args.walk_length, window=args.window,
        negatives_per_target=args.neg, sg_lr=args.lr, sg_epochs=args.epochs, seed=args.seed,
    )
    config.validate()
    rng = make_rng(config.seed)
    corpus = generate_walks(graph, config, rng)
    table = skipgram_train(corpus, graph.n, args.dim, config, rng)
    export_embeddings(table, graph.raw_ids, args.out)
    print(f"pretrained users={graph.n} dim={args.dim} walks={len(corpus)}")
    print(f"embeddings sha256={sha256_file(args.out)}")
    _write_manifest(
        args.out, "pretrain", vars(config) | {"dim": args.dim, "graph": str(args.graph)},
        inputs=[args.graph], outputs=[args.out], elapsed=time.monotonic() - started,
    )
    return 0


def cmd_train(args) -> int:
    started = time.monotonic()
    graph = load_graph(args.graph)
    split = split_edges(graph, args.split_ratio, args.seed)
    pretrained = None
    if args.init != "random":
        pretrained = import_embeddings(args.init, graph)
        if pretrained.shape[1] != args.dim:
            raise DataError(
                f"embedding file dimension {pretrained.shape[1]} != --dim {args.dim}"
            )
    config = TrainConfig(
        lr=args.lr, dim=args.dim, hidden=args.hidden, batch_size=args.batch,
        epochs=args.epochs, seed=args.seed, init=args.init, arch=args.arch,
    )
    result = train(graph, split, config, pretrained=pretrained)
    result.model.save(args.out)
    trace_path = str(args.out) + ".loss.csv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_nll\n")
        for epoch, loss in enumerate(result.loss_trace, start=1):
            fh.write(f"{epoch},{loss:.6f}\n")
    outputs = [args.out, trace_path]
    if args.export_split:
        train_path = str(args.out) + ".train-edges.txt"
        test_path = str(args.out) + ".test-edges.txt"
        write_edge_list(train_path, graph, split.train)
        write_edge_list(test_path, graph, split.test)
        outputs += [train_path, test_path]
    final = f"{result.loss_trace[-1]:.4f}" if result.loss_trace else "n/a"
    print(
        f"trained arch={config.arch} users={graph.n} train_edges={split.train.shape[0]} "
        f"epochs={config.epochs} final_loss={final}"
    )
    print(f"model sha256={sha256_file(args.out)}")
    inputs = [args.graph] + ([args.init] if args.init != "random" else [])
    _write_manifest(
        args.out, "train",
        vars(config) | {"split_ratio": args.split_ratio, "graph": str(args.graph)},
        inputs=inputs, outputs=outputs, elapsed=time.monotonic() - started,
    )
    return 0


def _check_model_matches_graph(model: TrustModel, graph) -> None:
    if model.n != graph.n or not np.array_equal(model.raw_ids, graph.raw_ids):
        raise DataError("model was trained on a different graph (user mapping mismatch)")


def _warn_on_seed_mismatch(model_path, split_seed: int) -> None:
    manifest_path = str(model_path) + ".manifest.json"
    if not os.path.exists(manifest_path):
        return
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            recorded = json.load(fh).get("config", {}).get("seed")
    except (OSError, json.JSONDecodeError):
        return
    if recorded is not None and recorded != split_seed:
        print(
            f"warning: --split-seed {split_seed} differs from the model manifest seed "
            f"{recorded}; the reconstructed test split will not match training",
            file=sys.stderr,
        )


def cmd_eval(args) -> int:
    started = time.monotonic()
    model = TrustModel.load(args.model)
    graph = load_graph(args.graph)
    _check_model_matches_graph(model, graph)
    _warn_on_seed_mismatch(args.model, args.split_seed)
    split = split_edges(graph, args.split_ratio, args.split_seed)
    threads = _threads(args)
    rng = make_rng(args.eval_seed)
    overall = fscore_with_negatives(
        model, split.test, graph, runs=args.runs, rng=rng, threads=threads
    )
    # exact recall on the full positive test set, reported as the first metric
    overall.accuracy_no_neg = accuracy_without_negatives(model, split.test)
    segments = None
    if args.segment != "none":
        segments = segment_report(
            model, split.test, graph, view=args.segment, runs=args.runs,
            rng=make_rng(args.eval_seed + 1), threads=threads,
        )
        partition = segment_test_pairs(split.test, graph, args.segment)
        for key, rep in segments.items():
            if rep is not None:
                rep.accuracy_no_neg = accuracy_without_negatives(model, partition[key])
    rows = report_rows(overall, segments)
    write_report_csv(args.out, rows)
    print(format_report_table(rows), end="")
    _write_manifest(
        args.out, "eval",
        {
            "model": str(args.model), "graph": str(args.graph),
            "split_ratio": args.split_ratio, "split_seed": args.split_seed,
            "eval_seed": args.eval_seed, "runs": args.runs, "segment": args.segment,
        },
        inputs=[args.model, args.graph], outputs=[args.out],
        elapsed=time.monotonic() - started,
    )
    return 0


def _iter_pair_rows(args):
    if args.pair is not None:
        yield 1, f"{args.pair[0]} {args.pair[1]}"
        return
    with open(args.pairs, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip() and not line.lstrip().startswith("#"):
                yield line_no, line


def cmd_predict(args) -> int:
    model = TrustModel.load(args.model)
    mapping = model.raw_to_dense
    successes = failures = 0
    print("trustor,trustee,label,p_trust")
    for line_no, line in _iter_pair_rows(args):
        tokens = line.replace(",", " ").split()
        if len(tokens) != 2:
            print(f"?,?,error:malformed-line-{line_no},")
            failures += 1
            continue
        try:
            raw_r, raw_s = int(tokens[0]), int(tokens[1])
        except ValueError:
            print(f"{tokens[0]},{tokens[1]},error:non-integer,")
            failures += 1
            continue
        r = mapping.get(raw_r)
        s = mapping.get(raw_s)
        if r is None or s is None:
            print(f"{raw_r},{raw_s},error:unknown-user,")
            failures += 1
            continue
        p_trust = float(model.prob_trust(np.asarray([r]), np.asarray([s]))[0])
        label = "trust" if p_trust >= args.threshold else "no-trust"
        print(f"{raw_r},{raw_s},{label},{p_trust:.6f}")
        successes += 1
    if successes == 0 and failures > 0:
        return 2
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="trustnet", description=__doc__)
    parser.add_argument("--version", action="version", version=f"trustnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an edge list and serialize the graph")
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pretrain", help="random-walk + skip-gram embedding pretraining")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--walks", type=int, default=10)
    p.add_argument("--walk-length", type=int, default=40)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--neg", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="split edges and train the trust model")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-ratio", type=float, default=0.8)
    p.add_argument("--init", default="random", help="'random' or a pretrained embedding file")
    p.add_argument("--arch", choices=[ARCH_JOINT, ARCH_SIMPLE], default=ARCH_JOINT)
    p.add_argument("--lr", type=float, default=0.4)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--export-split", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="reconstruct the test split and report both metrics")
    p.add_argument("--model", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-ratio", type=float, default=0.8)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--segment", choices=[VIEW_IN, VIEW_OUT, "none"], default="none")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict trust for raw-id user pairs")
    p.add_argument("--model", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pair", nargs=2, metavar=("R", "S"))
    group.add_argument("--pairs", help="file of 'trustor trustee' rows")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
