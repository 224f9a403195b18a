"""Signed graph core: representation, ingestion, triads, synthetic generator.

A signed graph keeps two disjoint sets of undirected edges (positive and
negative) over nodes 0..n-1.  Directed rating data is collapsed to this
undirected view by summing signed values per unordered pair; ties drop the
pair.  Triangle machinery classifies each triangle by its negative-edge
count: an even count is balanced, an odd count is unbalanced.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Sequence, Set, Tuple

import numpy as np
import scipy.sparse as sp

Edge = Tuple[int, int]


class EdgeListError(ValueError):
    """Malformed edge-list input; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class EmptyGraphError(ValueError):
    """The input contained no usable edges."""


@dataclass(frozen=True)
class SignedGraph:
    """Undirected signed graph with node ids 0..n-1.

    pos_edges and neg_edges hold unordered pairs (u, v) with u < v and are
    disjoint; self-loops are forbidden.  Instances are immutable and safe to
    share across threads.
    """

    n: int
    pos_edges: frozenset
    neg_edges: frozenset

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        if self.pos_edges & self.neg_edges:
            raise ValueError("an edge pair cannot be both positive and negative")
        for u, v in self.pos_edges | self.neg_edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range or unordered")

    @property
    def num_edges(self) -> int:
        return len(self.pos_edges) + len(self.neg_edges)

    def edges(self) -> List[Tuple[int, int, int]]:
        """All edges as sorted (u, v, sign) triples with sign in {+1, -1}."""
        out = [(u, v, 1) for u, v in self.pos_edges]
        out += [(u, v, -1) for u, v in self.neg_edges]
        out.sort()
        return out

    def sign(self, u: int, v: int) -> int:
        """Sign of edge {u, v}: +1, -1, or 0 when absent."""
        e = (u, v) if u < v else (v, u)
        if e in self.pos_edges:
            return 1
        if e in self.neg_edges:
            return -1
        return 0

    @cached_property
    def neighbors(self) -> Dict[int, Set[int]]:
        """Combined (positive plus negative) adjacency sets."""
        adj: Dict[int, Set[int]] = {v: set() for v in range(self.n)}
        for u, v in self.pos_edges | self.neg_edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    @cached_property
    def pos_degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.pos_edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    @cached_property
    def neg_degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.neg_edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def signed_adjacency(self) -> sp.csr_matrix:
        """Symmetric matrix with +1 on positive and -1 on negative pairs."""
        rows, cols, vals = [], [], []
        for (u, v), s in [(e, 1.0) for e in self.pos_edges] + [
            (e, -1.0) for e in self.neg_edges
        ]:
            rows += [u, v]
            cols += [v, u]
            vals += [s, s]
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(self.n, self.n), dtype=np.float64
        )


@dataclass(frozen=True)
class TriadCensus:
    """Triangle counts by number of negative edges (0 through 3)."""

    t0: int
    t1: int
    t2: int
    t3: int

    @property
    def total(self) -> int:
        return self.t0 + self.t1 + self.t2 + self.t3

    @property
    def balanced(self) -> int:
        return self.t0 + self.t2


@dataclass(frozen=True)
class SsbmParams:
    """Parameters of the polarized signed stochastic block model."""

    n: int = 1000
    blocks: int = 10
    p_in_pos: float = 0.1
    p_in_neg: float = 0.005
    p_out_pos: float = 0.005
    p_out_neg: float = 0.05
    seed: int = 7

    def __post_init__(self):
        if self.blocks < 1 or self.n < self.blocks:
            raise ValueError("need n >= blocks >= 1")
        for p in (self.p_in_pos, self.p_in_neg, self.p_out_pos, self.p_out_neg):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.p_in_pos + self.p_in_neg > 1.0 or self.p_out_pos + self.p_out_neg > 1.0:
            raise ValueError("per-pair sign probabilities must sum to at most 1")


def canonicalize(signed_edges: Iterable[Tuple[int, int, float]], n: int | None = None) -> SignedGraph:
    """Collapse a directed multiset of signed edges to an undirected graph.

    Values for each unordered pair are summed; a positive sum yields a
    positive edge, a negative sum a negative edge, and an exact zero drops
    the pair.  Self-loops are dropped.  Idempotent.
    """
    sums: Dict[Edge, float] = {}
    max_id = -1
    for u, v, value in signed_edges:
        max_id = max(max_id, u, v)
        if u == v:
            continue
        e = (u, v) if u < v else (v, u)
        sums[e] = sums.get(e, 0.0) + float(value)
    if n is None:
        n = max_id + 1
    pos = frozenset(e for e, s in sums.items() if s > 0)
    neg = frozenset(e for e, s in sums.items() if s < 0)
    return SignedGraph(n=n, pos_edges=pos, neg_edges=neg)


def load_edge_list(path, format: str = "raw-rating") -> Tuple[SignedGraph, Dict[int, int]]:
    """Load a CSV edge list `source,target,value[,timestamp]`.

    `raw-rating` accepts any nonzero numeric value (sign decides polarity,
    magnitude feeds the per-pair sum); `signed` requires values in {+1, -1}.
    Node ids are compacted to 0..n-1 in ascending original-id order; the
    original->compact mapping is returned alongside the graph.
    """
    if format not in ("raw-rating", "signed"):
        raise ValueError(f"unknown edge-list format: {format!r}")
    rows: List[Tuple[int, int, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, fields in enumerate(reader, start=1):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if lineno == 1 and not _is_number(fields[0]):
                continue  # header row
            if len(fields) < 3:
                raise EdgeListError(lineno, f"expected at least 3 fields, got {len(fields)}")
            try:
                u = int(fields[0])
                v = int(fields[1])
                value = float(fields[2])
            except ValueError as exc:
                raise EdgeListError(lineno, str(exc)) from exc
            if value == 0:
                raise EdgeListError(lineno, "zero value carries no sign")
            if format == "signed" and value not in (1.0, -1.0):
                raise EdgeListError(lineno, f"signed format requires +1/-1, got {value}")
            rows.append((u, v, value))
    if not rows:
        raise EmptyGraphError(f"no edges in {path}")
    original_ids = sorted({u for u, _, _ in rows} | {v for _, v, _ in rows})
    node_map = {orig: i for i, orig in enumerate(original_ids)}
    compacted = [(node_map[u], node_map[v], value) for u, v, value in rows]
    return canonicalize(compacted, n=len(original_ids)), node_map


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def triad_census(g: SignedGraph, nodes: Iterable[int] | None = None) -> TriadCensus:
    """Count the triangles of the induced subgraph by negative-edge count.

    Exact neighbor-intersection enumeration; each triangle counted once via
    the u < v < w ordering.
    """
    adj = g.neighbors
    if nodes is None:
        subset = set(range(g.n))
        edges = g.pos_edges | g.neg_edges
    else:
        subset = set(nodes)
        for v in subset:
            if not 0 <= v < g.n:
                raise ValueError(f"node {v} out of range")
        # Enumerate only the subset's internal edges via adjacency so small
        # subsets cost O(internal degree), not O(|E|).
        edges = [
            (u, v) for u in subset for v in adj[u] if u < v and v in subset
        ]
    counts = [0, 0, 0, 0]
    neg = g.neg_edges
    for u, v in edges:
        common = adj[u] & adj[v] & subset
        for w in common:
            if w <= v or w <= u:
                continue  # triangle is counted at its smallest-id pair only
            k = (
                ((u, v) in neg)
                + (((u, w) if u < w else (w, u)) in neg)
                + (((v, w) if v < w else (w, v)) in neg)
            )
            counts[k] += 1
    return TriadCensus(*counts)


def balance_ratio(g: SignedGraph, nodes: Iterable[int] | None = None) -> float:
    """Fraction of balanced triangles; 1.0 when the subgraph has none."""
    c = triad_census(g, nodes)
    if c.total == 0:
        return 1.0
    return c.balanced / c.total


def induced_subgraph(g: SignedGraph, nodes: Iterable[int]) -> Tuple[SignedGraph, List[int]]:
    """Subgraph on a node subset, ids re-compacted.

    Returns the subgraph and the sorted list of original ids, where position
    i holds the original id of compact node i.
    """
    node_list = sorted(set(nodes))
    for v in node_list:
        if not 0 <= v < g.n:
            raise ValueError(f"node {v} out of range")
    index = {orig: i for i, orig in enumerate(node_list)}
    keep = set(node_list)
    pos = frozenset(
        (index[u], index[v]) for u, v in g.pos_edges if u in keep and v in keep
    )
    neg = frozenset(
        (index[u], index[v]) for u, v in g.neg_edges if u in keep and v in keep
    )
    return SignedGraph(n=len(node_list), pos_edges=pos, neg_edges=neg), node_list


def block_of(node: int, n: int, blocks: int) -> int:
    """Contiguous block assignment used by the SSBM generator."""
    return node * blocks // n


def generate_polarized_ssbm(p: SsbmParams) -> SignedGraph:
    """Sample a polarized signed SBM: positive-leaning inside blocks,
    negative-leaning between blocks.

    For each unordered pair one uniform draw decides: positive if below the
    positive probability, negative if in the next band, absent otherwise.
    Bit-identical for a fixed seed.
    """
    rng = np.random.default_rng(p.seed)
    iu, iv = np.triu_indices(p.n, k=1)
    blk = np.arange(p.n, dtype=np.int64) * p.blocks // p.n
    same = blk[iu] == blk[iv]
    r = rng.random(iu.shape[0])
    p_pos = np.where(same, p.p_in_pos, p.p_out_pos)
    p_neg = np.where(same, p.p_in_neg, p.p_out_neg)
    pos_mask = r < p_pos
    neg_mask = (~pos_mask) & (r < p_pos + p_neg)
    pos = frozenset(zip(iu[pos_mask].tolist(), iv[pos_mask].tolist()))
    neg = frozenset(zip(iu[neg_mask].tolist(), iv[neg_mask].tolist()))
    return SignedGraph(n=p.n, pos_edges=pos, neg_edges=neg)


def write_canonical_csv(g: SignedGraph, path) -> None:
    """Dump edges as `u,v,sign` rows, u < v, sorted; bit-exact golden format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for u, v, s in g.edges():
            writer.writerow([u, v, f"{s:+d}"])


def write_node_map(node_map: Dict[int, int], path) -> None:
    """Dump the original->compact node-id mapping as `original_id,compact_id`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["original_id", "compact_id"])
        for orig in sorted(node_map):
            writer.writerow([orig, node_map[orig]])
