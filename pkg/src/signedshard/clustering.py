"""Sign-aware balanced agglomerative clustering into k shards.

Starting from the extracted groups (each kept atomic so its negative edges
stay inside one shard), pairs of clusters are merged greedily.  The merge
score blends cut density between the pair (RatioCut, min-max normalized per
round) with the balanced-triangle fraction of the merged subgraph, weighted
by alpha.  An intra-edge cap ceil((1+delta)*|E|/k) keeps shards edge-
balanced; when no feasible pair exists the slack delta relaxes by 0.25.
Also provides the node-balanced random baseline partitioner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .extraction import OppositiveGroup, signed_power_iteration
from .graph import SignedGraph, TriadCensus, balance_ratio, triad_census
from .seeding import derive_seed


class InfeasiblePartitionError(ValueError):
    """Target shard count cannot be met from the given inputs."""


@dataclass(frozen=True)
class ClusteringParams:
    k: int
    alpha: float = 0.5
    delta: float = 0.25

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


@dataclass(frozen=True)
class Cluster:
    members: frozenset
    intra_edges: int
    census: TriadCensus

    def __post_init__(self):
        if not self.members:
            raise ValueError("cluster must be non-empty")


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of the node set into k shards."""

    k: int
    assignment: Tuple[int, ...]  # node id -> shard id
    clusters: Tuple[Cluster, ...]
    delta_final: float = 0.0

    def shard_of(self, node: int) -> int:
        return self.assignment[node]

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "delta_final": self.delta_final,
            "assignment": {str(v): s for v, s in enumerate(self.assignment)},
        }


def partition_from_members(
    g: SignedGraph, member_sets: Sequence[Iterable[int]], delta_final: float = 0.0
) -> Partition:
    """Build a Partition (with fresh caches) from explicit shard node sets."""
    assignment = [-1] * g.n
    clusters = []
    for sid, members in enumerate(member_sets):
        mem = frozenset(members)
        for v in mem:
            if assignment[v] != -1:
                raise ValueError(f"node {v} assigned twice")
            assignment[v] = sid
        clusters.append(
            Cluster(mem, _intra_edge_count(g, mem), triad_census(g, mem))
        )
    if any(s == -1 for s in assignment):
        raise ValueError("shard sets do not cover all nodes")
    return Partition(
        k=len(clusters),
        assignment=tuple(assignment),
        clusters=tuple(clusters),
        delta_final=delta_final,
    )


def partition_from_json(g: SignedGraph, data: dict) -> Partition:
    assign = data["assignment"]
    k = int(data["k"])
    members = [set() for _ in range(k)]
    for node, shard in assign.items():
        members[int(shard)].add(int(node))
    return partition_from_members(g, members, float(data.get("delta_final", 0.0)))


def _intra_edge_count(g: SignedGraph, members: frozenset) -> int:
    return sum(
        1 for u, v in g.pos_edges | g.neg_edges if u in members and v in members
    )


def ratio_cut(g: SignedGraph, c_i: Iterable[int], c_j: Iterable[int]) -> float:
    """Cut edges between the sets, normalized by both sizes: cut/|Ci| + cut/|Cj|."""
    a, b = set(c_i), set(c_j)
    if not a or not b:
        raise ValueError("both sets must be non-empty")
    if a & b:
        raise ValueError("sets must be disjoint")
    cut = _cut_count(g, a, b)
    return cut / len(a) + cut / len(b)


def _cut_count(g: SignedGraph, a: set, b: set) -> int:
    small, other = (a, b) if len(a) <= len(b) else (b, a)
    cut = 0
    for u in small:
        for w in g.neighbors[u]:
            if w in other:
                cut += 1
    return cut


def balance_ratio_merged(g: SignedGraph, c_i: Iterable[int], c_j: Iterable[int]) -> float:
    """Balanced-triangle fraction of the union's induced subgraph."""
    a, b = set(c_i), set(c_j)
    if a & b:
        raise ValueError("sets must be disjoint")
    return balance_ratio(g, a | b)


def similarity(
    g: SignedGraph,
    c_i: Iterable[int],
    c_j: Iterable[int],
    alpha: float,
    rc_norm: float,
) -> float:
    """Merge preference: alpha * RatioCut/rc_norm + (1-alpha) * BalanceRatio."""
    if rc_norm <= 0:
        raise ValueError("rc_norm must be positive")
    return alpha * (ratio_cut(g, c_i, c_j) / rc_norm) + (1.0 - alpha) * (
        balance_ratio_merged(g, c_i, c_j)
    )


class _Agglomerator:
    """Mutable merge state: member sets, pairwise cut counts, census caches."""

    def __init__(self, g: SignedGraph, member_sets: List[frozenset]):
        self.g = g
        self.members: Dict[int, set] = {i: set(m) for i, m in enumerate(member_sets)}
        self.census: Dict[int, TriadCensus] = {
            i: triad_census(g, m) for i, m in self.members.items()
        }
        self.low: Dict[int, int] = {i: min(m) for i, m in self.members.items()}
        self.next_id = len(member_sets)
        owner = {}
        for cid, mem in self.members.items():
            for v in mem:
                owner[v] = cid
        self.intra: Dict[int, int] = {i: 0 for i in self.members}
        self.cut: Dict[int, Dict[int, int]] = {i: {} for i in self.members}
        for u, v in g.pos_edges | g.neg_edges:
            a, b = owner[u], owner[v]
            if a == b:
                self.intra[a] += 1
            else:
                self.cut[a][b] = self.cut[a].get(b, 0) + 1
                self.cut[b][a] = self.cut[b].get(a, 0) + 1
        self._merged_balance: Dict[Tuple[int, int], float] = {}

    def cut_between(self, a: int, b: int) -> int:
        return self.cut[a].get(b, 0)

    def merged_balance(self, a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        if key not in self._merged_balance:
            self._merged_balance[key] = self._compute_merged_balance(a, b)
        return self._merged_balance[key]

    def _compute_merged_balance(self, a: int, b: int) -> float:
        ca, cb = self.census[a], self.census[b]
        cross = self._cross_census(self.members[a], self.members[b])
        counts = [
            ca.t0 + cb.t0 + cross[0],
            ca.t1 + cb.t1 + cross[1],
            ca.t2 + cb.t2 + cross[2],
            ca.t3 + cb.t3 + cross[3],
        ]
        total = sum(counts)
        if total == 0:
            return 1.0
        return (counts[0] + counts[2]) / total


    def _cross_census(self, a: set, b: set) -> List[int]:
        """Triangle counts spanning both sets.

        Every spanning triangle has exactly two cut edges, so iterating cut
        edges and common neighbors inside the union counts each twice.
        """
        g = self.g
        union = a | b
        twice = [0, 0, 0, 0]
        small, other = (a, b) if len(a) <= len(b) else (b, a)
        neg = g.neg_edges
        for u in small:
            for v in g.neighbors[u]:
                if v not in other:
                    continue
                for w in g.neighbors[u] & g.neighbors[v]:
                    if w not in union:
                        continue
                    k = (
                        (((u, v) if u < v else (v, u)) in neg)
                        + (((u, w) if u < w else (w, u)) in neg)
                        + (((v, w) if v < w else (w, v)) in neg)
                    )
                    twice[k] += 1
        return [t // 2 for t in twice]

    def merge(self, a: int, b: int) -> int:
        new_id = self.next_id
        self.next_id += 1
        self.members[new_id] = self.members[a] | self.members[b]
        self.low[new_id] = min(self.low[a], self.low[b])
        self.intra[new_id] = self.intra[a] + self.intra[b] + self.cut_between(a, b)
        self.census[new_id] = triad_census(self.g, self.members[new_id])
        self.cut[new_id] = {}
        for old, other_map in ((a, self.cut[a]), (b, self.cut[b])):
            for nbr, c in other_map.items():
                if nbr in (a, b):
                    continue
                self.cut[new_id][nbr] = self.cut[new_id].get(nbr, 0) + c
                del self.cut[nbr][old]
                self.cut[nbr][new_id] = self.cut[new_id][nbr]
        for old in (a, b):
            del self.members[old], self.intra[old], self.census[old], self.cut[old]
            del self.low[old]
        self._merged_balance = {
            key: val
            for key, val in self._merged_balance.items()
            if a not in key and b not in key
        }
        return new_id


def agglomerate(
    g: SignedGraph,
    groups: List[OppositiveGroup],
    params: ClusteringParams,
    seed: int = 0,
) -> Partition:
    """Merge extracted groups down to exactly k edge-capped shards.

    Each group enters as one atomic cluster.  When fewer than k clusters
    exist the largest is split by the sign of its leading signed eigenvector
    until k are available.  Each round scores feasible pairs (merged intra
    edges within the cap, at least one connecting edge when possible) and
    merges the best; ties prefer the smaller merged cluster, then the lower
    smallest node id.
    """
    if params.k > g.n:
        raise InfeasiblePartitionError(f"k={params.k} exceeds node count {g.n}")
    covered = set()
    for gr in groups:
        if covered & gr.members:
            raise ValueError("groups overlap")
        covered |= gr.members
    if covered != set(range(g.n)):
        raise ValueError("groups must cover all nodes")
    member_sets = [frozenset(gr.members) for gr in groups]
    total_edges = g.num_edges
    delta = params.delta
    base_cap = math.ceil((1.0 + delta) * total_edges / params.k)
    member_sets = _split_over_cap(g, member_sets, base_cap, seed)
    member_sets = _ensure_at_least_k(g, member_sets, params.k, seed)
    state = _Agglomerator(g, member_sets)
    while len(state.members) > params.k:
        cap = math.ceil((1.0 + delta) * total_edges / params.k)
        # Pairs with a connecting edge come straight off the cut map; the
        # quadratic scan over disconnected pairs only runs as a fallback.
        feasible = sorted(
            (a, b, c)
            for a, nbrs in state.cut.items()
            for b, c in nbrs.items()
            if a < b and state.intra[a] + state.intra[b] + c <= cap
        )
        if not feasible:
            ids = sorted(state.members)
            feasible = [
                (a, b, 0)
                for i, a in enumerate(ids)
                for b in ids[i + 1:]
                if state.cut_between(a, b) == 0
                and state.intra[a] + state.intra[b] <= cap
            ]
        if not feasible:
            delta += 0.25
            continue
        rc = {
            (a, b): (c / len(state.members[a]) + c / len(state.members[b]))
            for a, b, c in feasible
        }
        rc_norm = max(rc.values())
        if rc_norm <= 0:
            rc_norm = 1.0
        best = None
        # Score in descending cut-term order: the balance term is at most 1,
        # so once a pair's upper bound falls below the best full score the
        # remaining pairs cannot win and their balance is never computed.
        order = sorted(feasible, key=lambda t: (-rc[(t[0], t[1])], t[0], t[1]))
        for a, b, _ in order:
            bound = params.alpha * (rc[(a, b)] / rc_norm) + (1.0 - params.alpha)
            if best is not None and bound < -best[0][0]:
                break
            score = params.alpha * (rc[(a, b)] / rc_norm) + (
                1.0 - params.alpha
            ) * state.merged_balance(a, b)
            size = len(state.members[a]) + len(state.members[b])
            low = min(state.low[a], state.low[b])
            key = (-score, size, low)
            if best is None or key < best[0]:
                best = (key, a, b)
        state.merge(best[1], best[2])
    return partition_from_members(
        g, [state.members[i] for i in sorted(state.members)], delta_final=delta
    )


def _split_over_cap(
    g: SignedGraph, member_sets: List[frozenset], cap: int, seed: int
) -> List[frozenset]:
    """Recursively bisect any initial cluster whose intra edges exceed the cap.

    A cluster already above the cap can never satisfy the edge-balance
    requirement (merging only grows it), so group atomicity yields to the
    cap here.  Splits use the same signed eigenvector bisection as the
    fewer-than-k fallback.
    """
    out: List[frozenset] = []
    queue = list(member_sets)
    split_no = 0
    while queue:
        mem = queue.pop(0)
        if len(mem) > 1 and _intra_edge_count(g, mem) > cap:
            lo, hi = _bisect(g, sorted(mem), derive_seed(seed, "cap-split", split_no))
            split_no += 1
            queue += [frozenset(lo), frozenset(hi)]
        else:
            out.append(mem)
    return out


def _ensure_at_least_k(
    g: SignedGraph, member_sets: List[frozenset], k: int, seed: int
) -> List[frozenset]:
    """Split the largest cluster by eigenvector-sign bisection until >= k."""
    sets = list(member_sets)
    split_no = 0
    while len(sets) < k:
        sets.sort(key=lambda m: (-len(m), min(m)))
        target = sets.pop(0)
        if len(target) < 2:
            raise InfeasiblePartitionError(
                f"cannot reach k={k}: largest remaining cluster is a singleton"
            )
        lo, hi = _bisect(g, sorted(target), derive_seed(seed, "bisect", split_no))
        split_no += 1
        sets += [frozenset(lo), frozenset(hi)]
    return sets


def _bisect(g: SignedGraph, nodes: List[int], seed: int) -> Tuple[List[int], List[int]]:
    pi = signed_power_iteration(g, nodes, seed=seed)
    if pi.has_edges:
        lo = [v for v, x in zip(pi.nodes, pi.vector) if x < 0]
        hi = [v for v, x in zip(pi.nodes, pi.vector) if x >= 0]
        if lo and hi:
            return lo, hi
        # one-sided eigenvector (e.g. all-positive cluster): split at the
        # median entry, ties toward the lower node id
        order = sorted(range(len(nodes)), key=lambda i: (pi.vector[i], pi.nodes[i]))
        half = len(nodes) // 2
        return [pi.nodes[i] for i in order[:half]], [pi.nodes[i] for i in order[half:]]
    half = len(nodes) // 2
    return nodes[:half], nodes[half:]


def random_balanced_partition(g: SignedGraph, k: int, seed: int = 0) -> Partition:
    """Node-balanced baseline: shuffle nodes, deal round-robin into k shards."""
    if k > g.n:
        raise InfeasiblePartitionError(f"k={k} exceeds node count {g.n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(g.n)
    members = [order[i::k].tolist() for i in range(k)]
    return partition_from_members(g, members)


def partition_diagnostics(g: SignedGraph, p: Partition) -> dict:
    """Per-shard size/edge/sign/balance stats plus global cut summary."""
    shards = []
    intra_total = 0
    for cluster in p.clusters:
        mem = cluster.members
        pos = sum(1 for u, v in g.pos_edges if u in mem and v in mem)
        intra = cluster.intra_edges
        intra_total += intra
        shards.append(
            {
                "nodes": len(mem),
                "intra_edges": intra,
                "positive_fraction": (pos / intra) if intra else 1.0,
                "balance_ratio": balance_ratio(g, mem),
            }
        )
    cut_edges = g.num_edges - intra_total
    intra_counts = [s["intra_edges"] for s in shards]
    mean_intra = sum(intra_counts) / len(intra_counts)
    return {
        "k": p.k,
        "delta_final": p.delta_final,
        "shards": shards,
        "cut_edges": cut_edges,
        "max_intra_edges": max(intra_counts),
        "max_over_mean_intra": (max(intra_counts) / mean_intra) if mean_intra else 1.0,
    }
