"""Command-line pipeline: synth | partition | train | unlearn | eval | bench.

Each command reads/writes JSON and CSV artifacts so runs can be composed,
reproduced, and diffed.  All JSON artifacts are written with sorted keys and
no timestamps; timing numbers go to separate timing files so the remaining
outputs are byte-identical across reruns of the same config.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .clustering import (
    ClusteringParams,
    InfeasiblePartitionError,
    Partition,
    agglomerate,
    partition_diagnostics,
    partition_from_json,
    random_balanced_partition,
)
from .ensemble import (
    EnsembleModel,
    UnlearnRequest,
    load_checkpoint,
    save_checkpoint,
    scratch_retrain,
    train_all,
    unlearn,
)
from .evaluation import (
    SplitSpec,
    evaluate_ensemble,
    report_table,
    run_unlearn_benchmark,
    split_edges,
)
from .extraction import ExtractionParams, extract_groups, groups_to_json
from .graph import (
    EdgeListError,
    EmptyGraphError,
    SignedGraph,
    SsbmParams,
    generate_polarized_ssbm,
    load_edge_list,
    write_canonical_csv,
    write_node_map,
)
from .model import ModelHyperparams
from .seeding import derive_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


class ConfigError(ValueError):
    pass


def _dump_json(obj, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    os.replace(tmp, path)


def _read_edges_csv(path: str) -> List[Tuple[int, int, int]]:
    edges = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            edges.append((int(row[0]), int(row[1]), int(row[2])))
    return edges


def _graph_from_edges(n: int, edges: List[Tuple[int, int, int]]) -> SignedGraph:
    return SignedGraph(
        n=n,
        pos_edges=frozenset((u, v) for u, v, s in edges if s > 0),
        neg_edges=frozenset((u, v) for u, v, s in edges if s < 0),
    )


def _write_edges_csv(edges: List[Tuple[int, int, int]], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for u, v, s in sorted(edges):
            writer.writerow([u, v, f"{s:+d}"])


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc


def _opt(args, config: dict, key: str, default):
    """Flag value if given, else config value, else default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return default


def _ssbm_from(args, config) -> SsbmParams:
    return SsbmParams(
        n=int(_opt(args, config, "n", 1000)),
        blocks=int(_opt(args, config, "blocks", 10)),
        p_in_pos=float(_opt(args, config, "p_in_pos", 0.1)),
        p_in_neg=float(_opt(args, config, "p_in_neg", 0.005)),
        p_out_pos=float(_opt(args, config, "p_out_pos", 0.005)),
        p_out_neg=float(_opt(args, config, "p_out_neg", 0.05)),
        seed=int(_opt(args, config, "seed", 7)),
    )


def _load_input_graph(args, config) -> Tuple[SignedGraph, Dict[int, int]]:
    path = _opt(args, config, "input", None)
    if path:
        fmt = _opt(args, config, "format", "raw-rating")
        return load_edge_list(path, format=fmt)
    params = _ssbm_from(args, config)
    g = generate_polarized_ssbm(params)
    return g, {v: v for v in range(g.n)}


def _hp_from(args, config, seed: int) -> ModelHyperparams:
    return ModelHyperparams(
        embed_dim=int(_opt(args, config, "embed_dim", 16)),
        learning_rate=float(_opt(args, config, "learning_rate", 0.1)),
        epochs=int(_opt(args, config, "epochs", 200)),
        l2=float(_opt(args, config, "l2", 1e-4)),
        seed=seed,
    )


def build_sgu_partition(
    g_train: SignedGraph,
    k: int,
    alpha: float,
    delta: float,
    seed: int,
    extraction: Optional[ExtractionParams] = None,
) -> Tuple[list, Partition, float, float]:
    """Extraction + clustering on the training graph, with stage timings."""
    params = extraction or ExtractionParams()
    t0 = time.perf_counter()
    groups = extract_groups(g_train, params, seed=derive_seed(seed, "extract"))
    stage_a = time.perf_counter() - t0
    t0 = time.perf_counter()
    partition = agglomerate(
        g_train, groups, ClusteringParams(k=k, alpha=alpha, delta=delta),
        seed=derive_seed(seed, "cluster"),
    )
    stage_b = time.perf_counter() - t0
    return groups, partition, stage_a, stage_b


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    g = generate_polarized_ssbm(_ssbm_from(args, config))
    write_canonical_csv(g, args.out)
    print(f"wrote {g.n} nodes, {g.num_edges} edges to {args.out}")
    return EXIT_OK


def cmd_partition(args) -> int:
    config = _load_config(args.config)
    out = _opt(args, config, "out", "partition_out")
    os.makedirs(out, exist_ok=True)
    g, node_map = _load_input_graph(args, config)
    seed = int(_opt(args, config, "seed", 0))
    k = int(_opt(args, config, "k", 10))
    alpha = float(_opt(args, config, "alpha", 0.5))
    delta = float(_opt(args, config, "delta", 0.25))
    train_fraction = float(_opt(args, config, "train_fraction", 0.8))
    partitioner = _opt(args, config, "partitioner", "sgu")
    write_canonical_csv(g, os.path.join(out, "graph.csv"))
    write_node_map(node_map, os.path.join(out, "node_map.csv"))
    g_train, test_edges = split_edges(
        g, SplitSpec(train_fraction=train_fraction, seed=derive_seed(seed, "split"))
    )
    _write_edges_csv(g_train.edges(), os.path.join(out, "train_edges.csv"))
    _write_edges_csv(test_edges, os.path.join(out, "test_edges.csv"))
    timings = {}
    if partitioner == "sgu":
        groups, partition, stage_a, stage_b = build_sgu_partition(
            g_train, k, alpha, delta, seed
        )
        _dump_json(groups_to_json(groups), os.path.join(out, "groups.json"))
        timings = {"stage_a_extraction_s": stage_a, "stage_b_clustering_s": stage_b}
    elif partitioner == "random":
        t0 = time.perf_counter()
        partition = random_balanced_partition(
            g_train, k, seed=derive_seed(seed, "random-partition")
        )
        timings = {"stage_random_s": time.perf_counter() - t0}
    else:
        raise ConfigError(f"unknown partitioner {partitioner!r}")
    _dump_json(partition.to_json(), os.path.join(out, "partition.json"))
    _dump_json(
        partition_diagnostics(g_train, partition), os.path.join(out, "diagnostics.json")
    )
    _dump_json(timings, os.path.join(out, "timings.json"))
    print(f"partitioned {g.n} nodes into {partition.k} shards -> {out}")
    return EXIT_OK


def _load_partition_dir(partition_dir: str) -> Tuple[SignedGraph, Partition, List]:
    part_path = os.path.join(partition_dir, "partition.json")
    with open(part_path) as fh:
        part_json = json.load(fh)
    n = len(part_json["assignment"])
    train_edges = _read_edges_csv(os.path.join(partition_dir, "train_edges.csv"))
    g_train = _graph_from_edges(n, train_edges)
    partition = partition_from_json(g_train, part_json)
    test_edges = _read_edges_csv(os.path.join(partition_dir, "test_edges.csv"))
    return g_train, partition, test_edges


def cmd_train(args) -> int:
    config = _load_config(args.config)
    g_train, partition, _ = _load_partition_dir(args.partition)
    seed = int(_opt(args, config, "seed", 0))
    hp = _hp_from(args, config, seed)
    ensemble = train_all(g_train, partition, hp, global_seed=seed)
    save_checkpoint(ensemble, args.out)
    for note in ensemble.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(f"trained {ensemble.k} shard models -> {args.out}")
    return EXIT_OK


def cmd_unlearn(args) -> int:
    ensemble = load_checkpoint(args.checkpoint)
    requests = []
    with open(args.requests) as fh:
        for line in fh:
            line = line.strip()
            if line:
                requests.append(UnlearnRequest.from_json(json.loads(line)))
    out = args.out or args.checkpoint
    reports = []
    for req in requests:
        ensemble, report = unlearn(ensemble, req)
        reports.append(
            {
                "request": req.to_json(),
                "applied": report.applied,
                "retrained_shard": report.retrained_shard,
                "wall_time_s": report.wall_time,
                "notice": report.notice,
            }
        )
        if report.notice:
            print(f"notice: {report.notice}", file=sys.stderr)
    save_checkpoint(ensemble, out)
    _dump_json(reports, os.path.join(out, "unlearn_timings.json"))
    retrained = sum(1 for r in reports if r["retrained_shard"] is not None)
    print(f"applied {len(requests)} requests ({retrained} shard retrains) -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    ensemble = load_checkpoint(args.checkpoint)
    test_edges = _read_edges_csv(args.test)
    rows = []
    report = evaluate_ensemble(ensemble, test_edges)
    rows.append({"name": "checkpoint", **report.to_json()})
    if args.compare == "scratch":
        scratch = scratch_retrain(
            ensemble.train_graph, ensemble.partition, ensemble.hp, ensemble.global_seed
        )
        rows.append({"name": "scratch", **evaluate_ensemble(scratch, test_edges).to_json()})
    result = {"reports": rows}
    if args.repeats and args.repeats > 1:
        if not args.partition:
            raise ConfigError("--repeats needs --partition (for the full graph)")
        full_edges = _read_edges_csv(os.path.join(args.partition, "graph.csv"))
        n = ensemble.train_graph.n
        g_full = _graph_from_edges(n, full_edges)
        seed = ensemble.global_seed
        scores = []
        for i in range(args.repeats):
            rep_seed = derive_seed(seed, "repeat", i)
            g_tr, te = split_edges(g_full, SplitSpec(seed=derive_seed(rep_seed, "split")))
            ens = train_all(g_tr, ensemble.partition, ensemble.hp, global_seed=rep_seed)
            scores.append(evaluate_ensemble(ens, te).macro_f1)
        result["repeats"] = {
            "n": args.repeats,
            "macro_f1_mean": float(np.mean(scores)),
            "macro_f1_std": float(np.std(scores)),
            "macro_f1_runs": scores,
        }
        print(
            f"macro-F1 over {args.repeats} runs: "
            f"{np.mean(scores):.4f} +/- {np.std(scores):.4f}"
        )
    if args.out:
        _dump_json(result, args.out)
    print(report_table(rows, ["macro_f1", "f1_pos", "f1_neg"], title="model utility"))
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    g, _ = _load_input_graph(args, config)
    seed = int(_opt(args, config, "seed", 0))
    k = int(_opt(args, config, "k", 10))
    alpha = float(_opt(args, config, "alpha", 0.5))
    delta = float(_opt(args, config, "delta", 0.25))
    deletion_fraction = float(_opt(args, config, "deletion_fraction", 0.005))
    hp = _hp_from(args, config, seed)

    def sgu_partitioner(g_train: SignedGraph) -> Partition:
        return build_sgu_partition(g_train, k, alpha, delta, seed)[1]

    def random_partitioner(g_train: SignedGraph) -> Partition:
        return random_balanced_partition(
            g_train, k, seed=derive_seed(seed, "random-partition")
        )

    rows = []
    for name, partitioner in (("sgu", sgu_partitioner), ("random", random_partitioner)):
        result = run_unlearn_benchmark(
            g, partitioner, hp, deletion_fraction=deletion_fraction, seed=seed
        )
        rows.append({"name": name, **result})
    if args.out:
        _dump_json({"rows": rows}, args.out)
    print(
        report_table(
            rows,
            [
                "partition_time_s",
                "train_time_s",
                "scratch_time_s",
                "mean_intra_unlearn_time_s",
                "macro_f1_before",
                "macro_f1_after",
                "mia_auc_original",
                "mia_auc_unlearned",
            ],
            title="unlearning benchmark (scratch row = full retrain time)",
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signedshard",
        description="Balance-aware signed graph partitioning with sharded "
        "training and exact edge unlearning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML config file; flags override it")
        p.add_argument("--seed", type=int, help="global seed (default 0)")

    def add_ssbm(p):
        p.add_argument("--input", help="edge-list CSV; omit to use the synthetic generator")
        p.add_argument("--format", choices=["raw-rating", "signed"])
        p.add_argument("--n", type=int)
        p.add_argument("--blocks", type=int)
        p.add_argument("--p-in-pos", dest="p_in_pos", type=float)
        p.add_argument("--p-in-neg", dest="p_in_neg", type=float)
        p.add_argument("--p-out-pos", dest="p_out_pos", type=float)
        p.add_argument("--p-out-neg", dest="p_out_neg", type=float)

    def add_hp(p):
        p.add_argument("--embed-dim", dest="embed_dim", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--l2", type=float)

    p = sub.add_parser("synth", help="generate a polarized synthetic signed graph")
    add_common(p)
    add_ssbm(p)
    p.add_argument("--out", required=True, help="output edge CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("partition", help="split, extract groups, cluster into shards")
    add_common(p)
    add_ssbm(p)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--partitioner", choices=["sgu", "random"])
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("train", help="train shard models from a partition directory")
    add_common(p)
    add_hp(p)
    p.add_argument("--partition", required=True, help="partition output directory")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("unlearn", help="apply JSONL removal requests to a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--requests", required=True, help="JSON-lines request file")
    p.add_argument("--out", help="output checkpoint dir (default: in place)")
    p.set_defaults(func=cmd_unlearn)

    p = sub.add_parser("eval", help="score a checkpoint on test edges")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True, help="test edge CSV (u,v,sign)")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--partition", help="partition dir (needed for --repeats)")
    p.add_argument("--compare", choices=["scratch"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="partition/train/unlearn timing benchmark")
    add_common(p)
    add_ssbm(p)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--deletion-fraction", dest="deletion_fraction", type=float)
    add_hp(p)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, EdgeListError, EmptyGraphError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, InfeasiblePartitionError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
