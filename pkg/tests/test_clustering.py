"""Balanced agglomerative clustering over extracted groups."""

import itertools

import numpy as np
import pytest

from signedshard.clustering import (
    ClusteringParams,
    InfeasiblePartitionError,
    agglomerate,
    balance_ratio_merged,
    partition_diagnostics,
    partition_from_json,
    partition_from_members,
    random_balanced_partition,
    ratio_cut,
    similarity,
)
from signedshard.extraction import OppositiveGroup, extract_groups
from signedshard.graph import SsbmParams, generate_polarized_ssbm

from conftest import make_graph, random_signed_graph


def singleton_groups(n):
    return [OppositiveGroup(frozenset({v}), frozenset(), 0.0) for v in range(n)]


# -------------------------------------------------------------------- ratio_cut

def test_ratio_cut_two_cross_edges():
    g = make_graph(3, pos=[(0, 2)], neg=[(1, 2)])
    assert ratio_cut(g, {0, 1}, {2}) == pytest.approx(3.0)


def test_ratio_cut_no_cross_edges_is_zero():
    g = make_graph(4, pos=[(0, 1)], neg=[(2, 3)])
    assert ratio_cut(g, {0, 1}, {2, 3}) == 0.0


def test_ratio_cut_single_edge_between_singletons():
    g = make_graph(2, pos=[(0, 1)])
    assert ratio_cut(g, {0}, {1}) == pytest.approx(2.0)


def test_ratio_cut_rejects_overlap_and_empty():
    g = make_graph(3, pos=[(0, 1)])
    with pytest.raises(ValueError):
        ratio_cut(g, {0, 1}, {1, 2})
    with pytest.raises(ValueError):
        ratio_cut(g, {0}, set())


def test_ratio_cut_symmetry_and_edge_scan_oracle(rng):
    for _ in range(20):
        g = random_signed_graph(rng, n_max=50)
        nodes = list(range(g.n))
        rng.shuffle(nodes)
        size_a = int(rng.integers(1, g.n))
        a, b = set(nodes[:size_a]), set(nodes[size_a:])
        if not b:
            continue
        cut = sum(
            1
            for u, v in g.pos_edges | g.neg_edges
            if (u in a) != (v in a)
        )
        expected = cut / len(a) + cut / len(b)
        assert ratio_cut(g, a, b) == pytest.approx(expected)
        assert ratio_cut(g, a, b) == ratio_cut(g, b, a)


# --------------------------------------------------------- balance_ratio_merged

def test_merge_creating_one_unbalanced_triangle():
    g = make_graph(3, pos=[(0, 1), (0, 2)], neg=[(1, 2)])
    assert balance_ratio_merged(g, {0}, {1, 2}) == 0.0


def test_merge_creating_two_balanced_triangles():
    g = make_graph(
        6,
        pos=[(0, 1), (3, 4), (3, 5), (4, 5)],
        neg=[(0, 2), (1, 2)],
    )
    assert balance_ratio_merged(g, {0, 1, 2}, {3, 4, 5}) == 1.0


def test_triangle_free_merge_defaults_to_one():
    g = make_graph(4, pos=[(0, 1)], neg=[(2, 3)])
    assert balance_ratio_merged(g, {0, 1}, {2, 3}) == 1.0


# ------------------------------------------------------------------- similarity

def test_similarity_alpha_extremes():
    g = make_graph(3, pos=[(0, 1), (0, 2)], neg=[(1, 2)])
    rc = ratio_cut(g, {0}, {1, 2})
    assert similarity(g, {0}, {1, 2}, alpha=1.0, rc_norm=rc) == pytest.approx(1.0)
    assert similarity(g, {0}, {1, 2}, alpha=0.0, rc_norm=rc) == pytest.approx(
        balance_ratio_merged(g, {0}, {1, 2})
    )


def test_similarity_blends_both_terms():
    g = make_graph(3, pos=[(0, 1), (0, 2)], neg=[(1, 2)])
    rc = ratio_cut(g, {0}, {1, 2})
    # Normalized cut term 1.0, merged balance 0.0 -> 0.5 at alpha=0.5.
    assert similarity(g, {0}, {1, 2}, alpha=0.5, rc_norm=rc) == pytest.approx(0.5)


# ------------------------------------------------------------- params/partition

def test_clustering_params_validation():
    with pytest.raises(ValueError):
        ClusteringParams(k=0)
    with pytest.raises(ValueError):
        ClusteringParams(k=2, alpha=1.5)
    with pytest.raises(ValueError):
        ClusteringParams(k=2, delta=-0.1)


def test_partition_from_members_rejects_bad_covers():
    g = make_graph(3, pos=[(0, 1)])
    with pytest.raises(ValueError):
        partition_from_members(g, [{0, 1}, {1, 2}])
    with pytest.raises(ValueError):
        partition_from_members(g, [{0, 1}])


def test_partition_json_round_trip():
    g = make_graph(4, pos=[(0, 1)], neg=[(2, 3)])
    p = partition_from_members(g, [{0, 1}, {2, 3}], delta_final=0.5)
    q = partition_from_json(g, p.to_json())
    assert q.assignment == p.assignment
    assert q.k == p.k and q.delta_final == p.delta_final


# ------------------------------------------------------------------ agglomerate

def test_groups_already_at_k_echo_through():
    g = make_graph(4, pos=[(0, 1)], neg=[(2, 3)])
    groups = [
        OppositiveGroup(frozenset({0, 1}), frozenset(), 1.0),
        OppositiveGroup(frozenset({2}), frozenset({3}), 1.0),
    ]
    p = agglomerate(g, groups, ClusteringParams(k=2))
    assert {c.members for c in p.clusters} == {frozenset({0, 1}), frozenset({2, 3})}


def test_k_one_merges_everything():
    g = make_graph(
        6,
        pos=[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)],
        neg=[(0, 3), (1, 4)],
    )
    groups = extract_groups(g)
    p = agglomerate(g, groups, ClusteringParams(k=1))
    assert p.k == 1 and p.clusters[0].members == frozenset(range(6))


def test_cap_holds_at_reported_final_delta():
    p_ssbm = SsbmParams(n=200, blocks=10, seed=3)
    g = generate_polarized_ssbm(p_ssbm)
    groups = extract_groups(g, seed=1)
    part = agglomerate(g, groups, ClusteringParams(k=5), seed=1)
    cap = int(np.ceil((1 + part.delta_final) * g.num_edges / 5))
    assert all(c.intra_edges <= cap for c in part.clusters)
    assert part.k == 5


def test_merge_conservation_of_edges(rng):
    for seed in range(5):
        g = generate_polarized_ssbm(SsbmParams(n=120, blocks=6, seed=seed))
        groups = extract_groups(g, seed=seed)
        p = agglomerate(g, groups, ClusteringParams(k=4), seed=seed)
        intra = sum(c.intra_edges for c in p.clusters)
        cut = sum(
            1
            for u, v in g.pos_edges | g.neg_edges
            if p.assignment[u] != p.assignment[v]
        )
        assert intra + cut == g.num_edges


def test_agglomerate_rejects_k_above_n():
    g = make_graph(3, pos=[(0, 1)])
    with pytest.raises((ValueError, InfeasiblePartitionError)):
        agglomerate(g, singleton_groups(3), ClusteringParams(k=4))


def test_fewer_groups_than_k_are_split_to_reach_k():
    g = make_graph(
        6,
        pos=[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)],
        neg=[(0, 3)],
    )
    groups = [OppositiveGroup(frozenset(range(6)), frozenset(), 0.0)]
    p = agglomerate(g, groups, ClusteringParams(k=2))
    assert p.k == 2
    assert {c.members for c in p.clusters} == {
        frozenset({0, 1, 2}),
        frozenset({3, 4, 5}),
    }


def test_agglomerate_is_seed_deterministic():
    g = generate_polarized_ssbm(SsbmParams(n=150, blocks=5, seed=2))
    groups = extract_groups(g, seed=4)
    a = agglomerate(g, groups, ClusteringParams(k=5), seed=4)
    b = agglomerate(g, groups, ClusteringParams(k=5), seed=4)
    assert a.assignment == b.assignment and a.delta_final == b.delta_final


def test_groups_stay_whole_through_merging():
    g = generate_polarized_ssbm(SsbmParams(n=100, blocks=5, seed=6))
    groups = extract_groups(g, seed=6)
    p = agglomerate(g, groups, ClusteringParams(k=5), seed=6)
    for gr in groups:
        shards = {p.assignment[v] for v in gr.members}
        assert len(shards) == 1


# --------------------------------------------------- random_balanced_partition

def test_random_partition_k_equals_n_gives_singletons():
    g = make_graph(5, pos=[(0, 1)])
    p = random_balanced_partition(g, 5)
    assert p.k == 5 and all(len(c.members) == 1 for c in p.clusters)


def test_random_partition_k_one_is_whole_graph():
    g = make_graph(5, pos=[(0, 1)])
    p = random_balanced_partition(g, 1)
    assert p.k == 1 and p.clusters[0].members == frozenset(range(5))


def test_random_partition_sizes_balance_within_one():
    g = make_graph(10)
    p = random_balanced_partition(g, 3, seed=0)
    sizes = sorted(len(c.members) for c in p.clusters)
    assert sizes == [3, 3, 4]


def test_random_partition_rejects_k_above_n():
    g = make_graph(2)
    with pytest.raises(InfeasiblePartitionError):
        random_balanced_partition(g, 3)


def test_random_partition_is_seed_deterministic():
    g = make_graph(20, pos=[(0, 1), (5, 6)])
    assert (
        random_balanced_partition(g, 4, seed=8).assignment
        == random_balanced_partition(g, 4, seed=8).assignment
    )


# --------------------------------------------------------- partition diagnostics

def test_single_shard_diagnostics():
    g = make_graph(4, pos=[(0, 1), (1, 2)], neg=[(2, 3)])
    p = partition_from_members(g, [set(range(4))])
    d = partition_diagnostics(g, p)
    assert d["cut_edges"] == 0
    assert d["shards"][0]["intra_edges"] == g.num_edges


def test_all_positive_graph_positive_fraction_is_one(rng):
    g = random_signed_graph(rng, n_max=20, p_neg=0.0)
    p = random_balanced_partition(g, 3, seed=1)
    d = partition_diagnostics(g, p)
    assert all(s["positive_fraction"] == 1.0 for s in d["shards"])


def test_diagnostics_totals_are_consistent():
    g = generate_polarized_ssbm(SsbmParams(n=100, blocks=5, seed=9))
    p = random_balanced_partition(g, 4, seed=9)
    d = partition_diagnostics(g, p)
    assert sum(s["intra_edges"] for s in d["shards"]) + d["cut_edges"] == g.num_edges
    assert sum(s["nodes"] for s in d["shards"]) == g.n
