"""Metrics and harnesses: splits, macro-F1, membership-inference AUC."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signedshard.clustering import random_balanced_partition
from signedshard.evaluation import (
    EvalReport,
    SplitSpec,
    UndefinedMetricError,
    confidence_score_fn,
    evaluate_ensemble,
    macro_f1,
    mia_auc,
    report_table,
    run_unlearn_benchmark,
    split_edges,
)
from signedshard.ensemble import train_all
from signedshard.graph import SsbmParams, generate_polarized_ssbm
from signedshard.model import ModelHyperparams

from conftest import make_graph, random_signed_graph


# ------------------------------------------------------------------ split_edges

def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=0.0)
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)


def test_stratified_split_counts():
    pos = [(0, i + 1) for i in range(90)]
    neg = [(100, 101 + i) for i in range(10)]
    g = make_graph(200, pos=pos, neg=neg)
    train, test = split_edges(g, SplitSpec(train_fraction=0.8, seed=0))
    assert len(train.pos_edges) == 72 and len(train.neg_edges) == 8
    assert len(test) == 20


def test_same_seed_gives_identical_split(rng):
    g = random_signed_graph(rng, n_max=40)
    spec = SplitSpec(seed=42)
    a_train, a_test = split_edges(g, spec)
    b_train, b_test = split_edges(g, spec)
    assert a_train == b_train and a_test == b_test


def test_split_partitions_the_edge_set(rng):
    for _ in range(10):
        g = random_signed_graph(rng, n_max=40)
        if g.num_edges < 4:
            continue
        train, test = split_edges(g, SplitSpec(seed=1))
        train_set = {(u, v, s) for u, v, s in train.edges()}
        test_set = set(test)
        assert not (train_set & test_set)
        assert train_set | test_set == set(g.edges())


def test_tiny_sign_class_degrades_to_plain_shuffle():
    g = make_graph(10, pos=[(0, 1), (1, 2), (2, 3), (3, 4)], neg=[(5, 6)])
    with pytest.warns(UserWarning):
        train, test = split_edges(g, SplitSpec(seed=0))
    assert len(test) == 1 and train.num_edges == 4


# --------------------------------------------------------------------- macro_f1

def test_perfect_predictions_score_one():
    report = macro_f1([0.9, 0.8, 0.1, 0.2], [1, 1, -1, -1])
    assert report.macro_f1 == 1.0
    assert report.confusion == {"tp": 2, "fp": 0, "fn": 0, "tn": 2}


def test_all_positive_predictions_on_balanced_labels():
    report = macro_f1([0.9, 0.9, 0.9, 0.9], [1, 1, -1, -1])
    assert report.f1_pos == pytest.approx(2 / 3)
    assert report.f1_neg == 0.0
    assert report.macro_f1 == pytest.approx(1 / 3)


def test_single_class_perfect_case_skips_absent_class():
    report = macro_f1([0.9, 0.8], [1, 1])
    assert report.macro_f1 == 1.0


def test_empty_predictions_raise():
    with pytest.raises(UndefinedMetricError):
        macro_f1([], [])


def test_length_mismatch_raises():
    with pytest.raises(ValueError):
        macro_f1([0.5], [1, -1])


def brute_force_macro_f1(preds, labels, threshold=0.5):
    tp = fp = fn = tn = 0
    for p, y in zip(preds, labels):
        predicted_pos = p >= threshold
        if predicted_pos and y > 0:
            tp += 1
        elif predicted_pos:
            fp += 1
        elif y > 0:
            fn += 1
        else:
            tn += 1
    f1p = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    f1n = 2 * tn / (2 * tn + fn + fp) if (2 * tn + fn + fp) else 0.0
    scores = []
    if tp + fn > 0 or tp + fp > 0:
        scores.append(f1p)
    if tn + fp > 0 or tn + fn > 0:
        scores.append(f1n)
    return sum(scores) / len(scores)


def test_macro_f1_matches_confusion_matrix_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(1, 1000))
        preds = rng.random(n)
        labels = np.where(rng.random(n) < 0.5, 1, -1)
        assert macro_f1(preds, labels).macro_f1 == pytest.approx(
            brute_force_macro_f1(preds, labels), abs=1e-12
        )


def test_report_invariant_macro_is_mean_of_per_class():
    report = macro_f1([0.9, 0.2, 0.7, 0.4], [1, -1, -1, 1])
    assert report.macro_f1 == pytest.approx((report.f1_pos + report.f1_neg) / 2)


# ---------------------------------------------------------------------- mia_auc

def score_table(table):
    return lambda e: table[e]


def test_perfectly_separated_scores_give_auc_one():
    members = [(0, 1), (0, 2)]
    others = [(1, 2), (1, 3)]
    fn = lambda e: 0.9 if e in members else 0.6
    assert mia_auc(fn, members, others) == 1.0


def test_identical_score_multisets_give_half():
    members = [(0, 1), (0, 2)]
    others = [(1, 2), (1, 3)]
    assert mia_auc(lambda e: 0.7, members, others) == 0.5


def test_mixed_scores_count_winning_pairs():
    table = {(0, 1): 0.9, (0, 2): 0.7, (9, 1): 0.8, (9, 2): 0.6}
    auc = mia_auc(score_table(table), [(0, 1), (0, 2)], [(9, 1), (9, 2)])
    assert auc == 0.75


def test_empty_lists_raise():
    with pytest.raises(UndefinedMetricError):
        mia_auc(lambda e: 0.5, [], [(0, 1)])
    with pytest.raises(UndefinedMetricError):
        mia_auc(lambda e: 0.5, [(0, 1)], [])


def brute_force_auc(member_scores, other_scores):
    wins = 0.0
    for a in member_scores:
        for b in other_scores:
            wins += 1.0 if a > b else (0.5 if a == b else 0.0)
    return wins / (len(member_scores) * len(other_scores))


def test_auc_matches_pairwise_oracle(rng):
    for _ in range(30):
        n_m = int(rng.integers(1, 200))
        n_o = int(rng.integers(1, 200))
        # Coarse grid provokes plenty of ties.
        m_scores = rng.integers(0, 10, n_m) / 10.0
        o_scores = rng.integers(0, 10, n_o) / 10.0
        members = [(0, i + 1) for i in range(n_m)]
        others = [(1, i + 2) for i in range(n_o)]
        table = {e: s for e, s in zip(members, m_scores)}
        table.update({e: s for e, s in zip(others, o_scores)})
        assert mia_auc(score_table(table), members, others) == pytest.approx(
            brute_force_auc(m_scores, o_scores), abs=1e-12
        )


def test_swapping_lists_complements_the_auc(rng):
    n = 50
    m_scores = rng.random(n)
    o_scores = rng.random(n)
    members = [(0, i + 1) for i in range(n)]
    others = [(1, i + 2) for i in range(n)]
    table = {e: s for e, s in zip(members, m_scores)}
    table.update({e: s for e, s in zip(others, o_scores)})
    fwd = mia_auc(score_table(table), members, others)
    rev = mia_auc(score_table(table), others, members)
    assert fwd == pytest.approx(1.0 - rev, abs=1e-12)


# ------------------------------------------------------------------- harnesses

def test_benchmark_reports_all_fields_and_k1_times_match():
    g = generate_polarized_ssbm(SsbmParams(n=80, blocks=2, seed=1))
    hp = ModelHyperparams(embed_dim=2, epochs=30, seed=0)
    result = run_unlearn_benchmark(
        g,
        lambda gt: random_balanced_partition(gt, 1, seed=0),
        hp,
        deletion_fraction=0.02,
        seed=0,
    )
    for key in (
        "n_deletions",
        "scratch_time_s",
        "mean_intra_unlearn_time_s",
        "macro_f1_before",
        "macro_f1_after",
        "mia_auc_original",
        "mia_auc_unlearned",
    ):
        assert key in result
    # Single shard: every deletion is intra-shard and each unlearn request
    # is itself a full retrain, so the two times are the same scale.
    assert result["n_cut_deletions"] == 0
    assert result["mean_intra_unlearn_time_s"] > 0.2 * result["scratch_time_s"]


def test_benchmark_is_deterministic_apart_from_timings():
    g = generate_polarized_ssbm(SsbmParams(n=80, blocks=4, seed=2))
    hp = ModelHyperparams(embed_dim=2, epochs=30, seed=0)
    part = lambda gt: random_balanced_partition(gt, 4, seed=5)
    a = run_unlearn_benchmark(g, part, hp, deletion_fraction=0.02, seed=3)
    b = run_unlearn_benchmark(g, part, hp, deletion_fraction=0.02, seed=3)
    for key in (
        "n_deletions",
        "n_intra_deletions",
        "n_cut_deletions",
        "macro_f1_before",
        "macro_f1_after",
        "mia_auc_original",
        "mia_auc_unlearned",
    ):
        assert a[key] == b[key]


def test_confidence_scores_fold_the_posterior():
    g = generate_polarized_ssbm(SsbmParams(n=40, blocks=2, seed=3))
    p = random_balanced_partition(g, 2, seed=0)
    e = train_all(g, p, ModelHyperparams(embed_dim=2, epochs=20, seed=0))
    score = confidence_score_fn(e)
    for u, v, _ in g.edges()[:20]:
        assert 0.5 <= score((u, v)) < 1.0


def test_report_table_includes_columns_and_rows():
    rows = [{"name": "a", "x": 1.0}, {"name": "b", "x": 2.5}]
    text = report_table(rows, ["x"], title="demo")
    assert "demo" in text and "a" in text and "2.5" in text
