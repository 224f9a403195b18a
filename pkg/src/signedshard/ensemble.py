"""Sharded training, aggregation, and exact unlearning.

Each shard trains only on edges with both endpoints inside it; edges that
cross shards influence no model, so deleting one is a metadata-only change.
Deleting an intra-shard edge (or a node) retrains exactly that shard with
its original derived seed, which makes the result bit-identical to training
from scratch on the reduced edge set with the same partition and seeds.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from .clustering import Partition, partition_from_json
from .graph import SignedGraph, induced_subgraph
from .model import ModelHyperparams, ShardModel, predict, train_shard
from .seeding import derive_seed

Edge = Tuple[int, int]


class UnknownElementError(KeyError):
    """The request referenced a node or edge outside the graph."""


@dataclass(frozen=True)
class UnlearnRequest:
    kind: str  # "remove-edge" | "remove-node"
    u: int
    v: Optional[int] = None

    @staticmethod
    def from_json(data: dict) -> "UnlearnRequest":
        op = data["op"]
        if op == "remove-edge":
            return UnlearnRequest("remove-edge", int(data["u"]), int(data["v"]))
        if op == "remove-node":
            return UnlearnRequest("remove-node", int(data["u"]))
        raise ValueError(f"unknown unlearn op: {op!r}")

    def to_json(self) -> dict:
        if self.kind == "remove-edge":
            return {"op": "remove-edge", "u": self.u, "v": self.v}
        return {"op": "remove-node", "u": self.u}


@dataclass(frozen=True)
class EnsembleModel:
    """k shard models plus the partition and training-edge bookkeeping.

    train_graph is the current training graph (deletions already applied);
    cut_edges are training edges excluded from every shard.
    """

    partition: Partition
    shard_models: Tuple[ShardModel, ...]
    hp: ModelHyperparams
    global_seed: int
    train_graph: SignedGraph
    cut_edges: frozenset
    warnings: Tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def global_prior(self) -> float:
        """Smoothed positive fraction of the current training edges."""
        m = self.train_graph.num_edges
        return (len(self.train_graph.pos_edges) + 1.0) / (m + 2.0)


@dataclass(frozen=True)
class UnlearnReport:
    kind: str
    retrained_shard: Optional[int]
    wall_time: float
    applied: bool
    notice: str = ""


def shard_seed(global_seed: int, shard_id: int) -> int:
    return derive_seed(global_seed, "shard", shard_id)


def _train_one_shard(
    g_train: SignedGraph, p: Partition, hp: ModelHyperparams, global_seed: int, sid: int
) -> ShardModel:
    members = sorted(p.clusters[sid].members)
    sub, node_list = induced_subgraph(g_train, members)
    shard_hp = replace(hp, seed=shard_seed(global_seed, sid))
    return train_shard(sub, shard_hp, nodes=node_list)


def train_all(
    g_train: SignedGraph,
    p: Partition,
    hp: ModelHyperparams,
    global_seed: int = 0,
) -> EnsembleModel:
    """Train every shard on its induced training subgraph.

    Edges whose endpoints fall in different shards are recorded as cut and
    excluded from all training sets.  Shard i trains with a seed derived
    from (global_seed, i), independent of the other shards.
    """
    if len(p.assignment) != g_train.n:
        raise ValueError("partition does not cover the training graph's nodes")
    cut = frozenset(
        (u, v)
        for u, v in g_train.pos_edges | g_train.neg_edges
        if p.assignment[u] != p.assignment[v]
    )
    models = []
    notes = []
    for sid in range(p.k):
        m = _train_one_shard(g_train, p, hp, global_seed, sid)
        if m.prior_only:
            notes.append(f"shard {sid} has no training edges; prior-only model")
        models.append(m)
    return EnsembleModel(
        partition=p,
        shard_models=tuple(models),
        hp=hp,
        global_seed=global_seed,
        train_graph=g_train,
        cut_edges=cut,
        warnings=tuple(notes),
    )


def aggregate_predict(e: EnsembleModel, u: int, v: int) -> float:
    """Ensemble probability that {u, v} is positive.

    The shard containing both endpoints answers; when the pair crosses
    shards (so no model ever saw it, by the cut-edge exclusion) the
    smoothed global training prior is returned.  With k=1 this is exactly
    the single shard's prediction.
    """
    if e.partition.assignment[u] == e.partition.assignment[v]:
        sid = e.partition.assignment[u]
        model = e.shard_models[sid]
        if not model.prior_only:
            return predict(model, u, v)
    return e.global_prior


def _remove_edge_graph(g: SignedGraph, u: int, v: int) -> SignedGraph:
    e = (u, v) if u < v else (v, u)
    return SignedGraph(
        n=g.n,
        pos_edges=g.pos_edges - {e},
        neg_edges=g.neg_edges - {e},
    )


def unlearn(e: EnsembleModel, r: UnlearnRequest) -> Tuple[EnsembleModel, UnlearnReport]:
    """Apply one removal request; retrains at most the owning shard."""
    if r.kind == "remove-edge":
        return _unlearn_edge(e, r)
    if r.kind == "remove-node":
        return _unlearn_node(e, r)
    raise ValueError(f"unknown request kind: {r.kind!r}")


def _unlearn_edge(e: EnsembleModel, r: UnlearnRequest) -> Tuple[EnsembleModel, UnlearnReport]:
    g = e.train_graph
    if not (0 <= r.u < g.n and 0 <= r.v < g.n):
        raise UnknownElementError(f"node out of range in {r}")
    pair = (r.u, r.v) if r.u < r.v else (r.v, r.u)
    if g.sign(*pair) == 0:
        return e, UnlearnReport(
            r.kind, None, 0.0, False, f"edge {pair} not in the training set; no-op"
        )
    new_graph = _remove_edge_graph(g, *pair)
    if pair in e.cut_edges:
        new_e = replace(e, train_graph=new_graph, cut_edges=e.cut_edges - {pair})
        return new_e, UnlearnReport(
            r.kind, None, 0.0, True, "cut edge: metadata-only deletion"
        )
    sid = e.partition.assignment[pair[0]]
    start = time.perf_counter()
    new_model = _train_one_shard(new_graph, e.partition, e.hp, e.global_seed, sid)
    elapsed = time.perf_counter() - start
    models = list(e.shard_models)
    models[sid] = new_model
    new_e = replace(e, train_graph=new_graph, shard_models=tuple(models))
    return new_e, UnlearnReport(r.kind, sid, elapsed, True)


def _unlearn_node(e: EnsembleModel, r: UnlearnRequest) -> Tuple[EnsembleModel, UnlearnReport]:
    g = e.train_graph
    if not 0 <= r.u < g.n:
        raise UnknownElementError(f"node {r.u} out of range")
    sid = e.partition.assignment[r.u]
    incident = [(a, b) for a, b in g.pos_edges | g.neg_edges if r.u in (a, b)]
    new_pos = frozenset(p for p in g.pos_edges if r.u not in p)
    new_neg = frozenset(p for p in g.neg_edges if r.u not in p)
    new_graph = SignedGraph(n=g.n, pos_edges=new_pos, neg_edges=new_neg)
    new_cut = frozenset(p for p in e.cut_edges if r.u not in p)
    had_intra = any(
        e.partition.assignment[a] == e.partition.assignment[b] for a, b in incident
    )
    models = list(e.shard_models)
    elapsed = 0.0
    if had_intra:
        start = time.perf_counter()
        models[sid] = _train_one_shard(new_graph, e.partition, e.hp, e.global_seed, sid)
        elapsed = time.perf_counter() - start
    new_e = replace(
        e, train_graph=new_graph, cut_edges=new_cut, shard_models=tuple(models)
    )
    return new_e, UnlearnReport(
        r.kind, sid if had_intra else None, elapsed, True,
        "" if had_intra else "node had no intra-shard training edges",
    )


def scratch_retrain(
    g_train: SignedGraph,
    p: Partition,
    hp: ModelHyperparams,
    global_seed: int = 0,
) -> EnsembleModel:
    """Full retraining baseline on the (possibly reduced) training graph.

    With the partition held fixed this is the exactness oracle for unlearn;
    callers that want repartitioning pass a freshly computed Partition.
    """
    return train_all(g_train, p, hp, global_seed)


# -- checkpoint directory I/O -------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def save_checkpoint(e: EnsembleModel, directory: str) -> None:
    """Write manifest + partition + one JSON file per shard (atomically)."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "global_seed": e.global_seed,
        "k": e.k,
        "n": e.train_graph.n,
        "hyperparams": {
            "embed_dim": e.hp.embed_dim,
            "learning_rate": e.hp.learning_rate,
            "epochs": e.hp.epochs,
            "l2": e.hp.l2,
        },
        "cut_edges": sorted([list(p) for p in e.cut_edges]),
        "train_edges": [[u, v, s] for u, v, s in e.train_graph.edges()],
        "warnings": list(e.warnings),
    }
    _atomic_write(os.path.join(directory, "manifest.json"), _dump(manifest))
    _atomic_write(
        os.path.join(directory, "partition.json"), _dump(e.partition.to_json())
    )
    for sid, model in enumerate(e.shard_models):
        _atomic_write(
            os.path.join(directory, f"shard_{sid:03d}.json"), _dump(model.to_json())
        )


def load_checkpoint(directory: str) -> EnsembleModel:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    hp = ModelHyperparams(
        embed_dim=manifest["hyperparams"]["embed_dim"],
        learning_rate=manifest["hyperparams"]["learning_rate"],
        epochs=manifest["hyperparams"]["epochs"],
        l2=manifest["hyperparams"]["l2"],
        seed=0,
    )
    pos = frozenset(
        (u, v) for u, v, s in manifest["train_edges"] if s > 0
    )
    neg = frozenset(
        (u, v) for u, v, s in manifest["train_edges"] if s < 0
    )
    g_train = SignedGraph(n=manifest["n"], pos_edges=pos, neg_edges=neg)
    with open(os.path.join(directory, "partition.json")) as fh:
        partition = partition_from_json(g_train, json.load(fh))
    models = []
    for sid in range(manifest["k"]):
        with open(os.path.join(directory, f"shard_{sid:03d}.json")) as fh:
            models.append(ShardModel.from_json(json.load(fh)))
    return EnsembleModel(
        partition=partition,
        shard_models=tuple(models),
        hp=hp,
        global_seed=manifest["global_seed"],
        train_graph=g_train,
        cut_edges=frozenset(tuple(p) for p in manifest["cut_edges"]),
        warnings=tuple(manifest["warnings"]),
    )
