"""Metrics and experiment harnesses.

Macro-F1 for link sign prediction, an exact rank-based membership-inference
AUC (attack score = max posterior confidence), stratified edge splitting,
and the unlearning-time benchmark comparing per-request retraining against
retraining from scratch.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .clustering import Partition
from .ensemble import (
    EnsembleModel,
    UnlearnRequest,
    aggregate_predict,
    scratch_retrain,
    train_all,
    unlearn,
)
from .graph import SignedGraph
from .model import ModelHyperparams
from .seeding import derive_seed

LabeledEdge = Tuple[int, int, int]  # u, v, sign


class UndefinedMetricError(ValueError):
    """Metric requested on empty input."""


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    stratify_by_sign: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class EvalReport:
    macro_f1: float
    f1_pos: float
    f1_neg: float
    confusion: Dict[str, int]  # tp/fp/fn/tn with positive as the target class

    def to_json(self) -> dict:
        return {
            "macro_f1": self.macro_f1,
            "f1_pos": self.f1_pos,
            "f1_neg": self.f1_neg,
            "confusion": dict(self.confusion),
        }


def split_edges(g: SignedGraph, spec: SplitSpec) -> Tuple[SignedGraph, List[LabeledEdge]]:
    """Stratified train/test edge split; returns (train graph, test edges).

    Each sign class is shuffled by the seed and the first floor(fraction)
    edges go to training.  Classes with fewer than 2 edges degrade the split
    to a plain shuffle with a warning.  Train and test are disjoint and
    their union is the full edge set.
    """
    pos = sorted(g.pos_edges)
    neg = sorted(g.neg_edges)
    rng = np.random.default_rng(spec.seed)
    stratify = spec.stratify_by_sign
    if stratify and (0 < len(pos) < 2 or 0 < len(neg) < 2):
        warnings.warn("a sign class has fewer than 2 edges; splitting unstratified")
        stratify = False
    if stratify:
        classes = [(pos, 1), (neg, -1)]
    else:
        classes = [(sorted([(u, v, 1) for u, v in pos] + [(u, v, -1) for u, v in neg]), 0)]
    train_pos, train_neg = set(), set()
    test: List[LabeledEdge] = []
    for edges, sign in classes:
        order = rng.permutation(len(edges))
        n_train = int(np.floor(len(edges) * spec.train_fraction + 1e-9))
        for rank, idx in enumerate(order):
            item = edges[idx]
            u, v, s = (item[0], item[1], sign) if sign else item
            if rank < n_train:
                (train_pos if s > 0 else train_neg).add((u, v))
            else:
                test.append((u, v, s))
    test.sort()
    train = SignedGraph(n=g.n, pos_edges=frozenset(train_pos), neg_edges=frozenset(train_neg))
    return train, test


def macro_f1(
    predictions: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> EvalReport:
    """Unweighted mean of per-class F1; prob >= threshold predicts positive.

    A class with zero true instances and zero predictions is skipped rather
    than scored 0, so single-class fixtures evaluate to 1.0 when perfect.
    """
    if len(predictions) == 0:
        raise UndefinedMetricError("cannot score an empty prediction set")
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    preds = np.asarray(predictions) >= threshold
    truth = np.asarray(labels) > 0
    tp = int(np.sum(preds & truth))
    fp = int(np.sum(preds & ~truth))
    fn = int(np.sum(~preds & truth))
    tn = int(np.sum(~preds & ~truth))
    scores = []
    f1_pos = _f1(tp, fp, fn)
    f1_neg = _f1(tn, fn, fp)
    if tp + fn > 0 or tp + fp > 0:  # positive class present or predicted
        scores.append(f1_pos)
    if tn + fp > 0 or tn + fn > 0:
        scores.append(f1_neg)
    return EvalReport(
        macro_f1=float(np.mean(scores)),
        f1_pos=f1_pos,
        f1_neg=f1_neg,
        confusion={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    )


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def mia_auc(
    score_fn: Callable[[Tuple[int, int]], float],
    member_edges: Sequence[Tuple[int, int]],
    nonmember_edges: Sequence[Tuple[int, int]],
) -> float:
    """Exact rank AUC: probability a member edge outscores a non-member.

    Ties count one half.  score_fn maps an edge to the attack confidence,
    conventionally max(p, 1-p) of the model's posterior.
    """
    if not member_edges or not nonmember_edges:
        raise UndefinedMetricError("both edge lists must be non-empty")
    members = np.array([score_fn(e) for e in member_edges])
    others = np.sort(np.array([score_fn(e) for e in nonmember_edges]))
    below = np.searchsorted(others, members, side="left")
    upto = np.searchsorted(others, members, side="right")
    wins = below + 0.5 * (upto - below)
    return float(np.sum(wins) / (len(members) * len(others)))


def confidence_score_fn(e: EnsembleModel) -> Callable[[Tuple[int, int]], float]:
    """Attack confidence of the ensemble: max(p, 1-p) of the posterior."""

    def score(edge: Tuple[int, int]) -> float:
        p = aggregate_predict(e, edge[0], edge[1])
        return max(p, 1.0 - p)

    return score


def evaluate_ensemble(e: EnsembleModel, test_edges: Sequence[LabeledEdge]) -> EvalReport:
    probs = [aggregate_predict(e, u, v) for u, v, _ in test_edges]
    labels = [s for _, _, s in test_edges]
    return macro_f1(probs, labels)


def run_unlearn_benchmark(
    g: SignedGraph,
    partitioner: Callable[[SignedGraph], Partition],
    hp: ModelHyperparams,
    deletion_fraction: float = 0.005,
    seed: int = 0,
    split: Optional[SplitSpec] = None,
) -> dict:
    """Timing and utility harness for a full unlearning round.

    Splits the graph, partitions the training graph, trains the ensemble,
    deletes a random sample of training edges one request at a time, and
    reports: per-request unlearn wall time (intra-shard and cut strata
    separately), scratch-retraining wall time, Macro-F1 before and after,
    and the membership-inference AUC of the original vs unlearned model on
    the deleted edges against an equal-size sample of test edges.
    """
    if split is None:
        split = SplitSpec(seed=derive_seed(seed, "split"))
    g_train, test_edges = split_edges(g, split)
    t0 = time.perf_counter()
    partition = partitioner(g_train)
    partition_time = time.perf_counter() - t0
    t0 = time.perf_counter()
    ensemble = train_all(g_train, partition, hp, global_seed=seed)
    train_time = time.perf_counter() - t0
    train_edges = g_train.edges()
    n_delete = max(1, int(round(deletion_fraction * len(train_edges))))
    rng = np.random.default_rng(derive_seed(seed, "deletions"))
    picks = rng.choice(len(train_edges), size=n_delete, replace=False)
    deleted = [(train_edges[i][0], train_edges[i][1]) for i in sorted(picks)]
    f1_before = evaluate_ensemble(ensemble, test_edges)
    rng_test = np.random.default_rng(derive_seed(seed, "mia-sample"))
    sample_idx = rng_test.choice(
        len(test_edges), size=min(n_delete, len(test_edges)), replace=False
    )
    nonmembers = [(test_edges[i][0], test_edges[i][1]) for i in sorted(sample_idx)]
    auc_original = mia_auc(confidence_score_fn(ensemble), deleted, nonmembers)
    unlearned = ensemble
    intra_times, cut_times = [], []
    for u, v in deleted:
        unlearned, report = unlearn(unlearned, UnlearnRequest("remove-edge", u, v))
        (intra_times if report.retrained_shard is not None else cut_times).append(
            report.wall_time
        )
    f1_after = evaluate_ensemble(unlearned, test_edges)
    auc_unlearned = mia_auc(confidence_score_fn(unlearned), deleted, nonmembers)
    t0 = time.perf_counter()
    scratch = scratch_retrain(unlearned.train_graph, partition, hp, global_seed=seed)
    scratch_time = time.perf_counter() - t0
    return {
        "n_deletions": n_delete,
        "n_intra_deletions": len(intra_times),
        "n_cut_deletions": len(cut_times),
        "partition_time_s": partition_time,
        "train_time_s": train_time,
        "scratch_time_s": scratch_time,
        "mean_intra_unlearn_time_s": (
            float(np.mean(intra_times)) if intra_times else 0.0
        ),
        "mean_cut_unlearn_time_s": float(np.mean(cut_times)) if cut_times else 0.0,
        "macro_f1_before": f1_before.macro_f1,
        "macro_f1_after": f1_after.macro_f1,
        "mia_auc_original": auc_original,
        "mia_auc_unlearned": auc_unlearned,
    }


def report_table(rows: List[dict], columns: List[str], title: str = "") -> str:
    """Aligned-column text table for report dicts (one dict per row)."""
    header = ["row"] + columns
    lines = [title] if title else []
    widths = [max(len(h), 12) for h in header]
    data = []
    for row in rows:
        cells = [str(row.get("name", ""))]
        for col in columns:
            val = row.get(col, "")
            cells.append(f"{val:.4f}" if isinstance(val, float) else str(val))
        data.append(cells)
        widths = [max(w, len(c)) for w, c in zip(widths, cells)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for cells in data:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"
