"""Oppositive cohesive group extraction.

Repeatedly solves the continuous relaxation max_{|x|=1} x^T S x, where S is
the signed adjacency (+1/-1), on the nodes not yet assigned.  Thresholding
the leading eigenvector splits selected nodes into a positively-aligned side
and a negatively-aligned side: two internally cohesive sets joined by
negative edges.  Extracted nodes are removed and the loop continues until
the residual leading eigenvalue falls to the single-edge floor; leftovers
become singleton groups, so the returned groups always partition V.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .graph import SignedGraph
from .seeding import derive_seed


@dataclass(frozen=True)
class ExtractionParams:
    tau: float = 0.3  # membership threshold relative to the max |entry|
    min_group: int = 3
    max_groups: Optional[int] = None  # defaults to n
    pi_tol: float = 1e-8
    pi_max_iter: int = 1000
    lambda_min: float = 1.0  # a lone edge's eigenvalue; below this, stop

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.pi_tol <= 0 or self.pi_max_iter < 1:
            raise ValueError("power-iteration controls must be positive")


@dataclass(frozen=True)
class OppositiveGroup:
    """One extracted group: two mutually hostile, internally cohesive sides.

    cohesion is x^T S x of the +/-1 indicator (+1 on p_side, -1 on n_side)
    divided by the member count; re-derivable from the graph.
    """

    p_side: frozenset
    n_side: frozenset
    cohesion: float

    @property
    def members(self) -> frozenset:
        return self.p_side | self.n_side

    def __post_init__(self):
        if self.p_side & self.n_side:
            raise ValueError("group sides must be disjoint")
        if not (self.p_side or self.n_side):
            raise ValueError("group must be non-empty")


@dataclass
class PowerIterationResult:
    eigenvalue: float
    vector: np.ndarray  # over `active`, unit norm; empty when no structure
    nodes: List[int]  # active nodes, vector[i] belongs to nodes[i]
    converged: bool
    has_edges: bool
    rayleigh_history: List[float] = field(default_factory=list)


def group_cohesion(g: SignedGraph, p_side, n_side) -> float:
    """x^T S x of the +/-1/0 assignment, normalized by member count."""
    members = set(p_side) | set(n_side)
    if not members:
        return 0.0
    quad = 0.0
    pset, nset = set(p_side), set(n_side)
    for u, v in g.pos_edges:
        if u in members and v in members:
            quad += 2.0 if ((u in pset) == (v in pset)) else -2.0
    for u, v in g.neg_edges:
        if u in members and v in members:
            quad += -2.0 if ((u in pset) == (v in pset)) else 2.0
    return quad / len(members)


def signed_power_iteration(
    g: SignedGraph,
    active: Sequence[int],
    tol: float = 1e-8,
    max_iter: int = 1000,
    seed: int = 0,
) -> PowerIterationResult:
    """Leading eigenpair of the signed adjacency restricted to `active`.

    Maximizes the Rayleigh quotient (the algebraically largest eigenvalue),
    via power iteration on the diagonally shifted positive-semidefinite
    matrix S + cI; the shift keeps the quotient non-decreasing across steps.
    The returned vector is unit norm with its largest-magnitude entry made
    positive.  An edgeless active set yields eigenvalue 0 and has_edges=False.
    """
    nodes = sorted(set(active))
    if not nodes:
        raise ValueError("active node set must be non-empty")
    index = {v: i for i, v in enumerate(nodes)}
    keep = set(nodes)
    m = len(nodes)
    rows, cols, vals = [], [], []
    for u, v in g.pos_edges:
        if u in keep and v in keep:
            rows += [index[u], index[v]]
            cols += [index[v], index[u]]
            vals += [1.0, 1.0]
    for u, v in g.neg_edges:
        if u in keep and v in keep:
            rows += [index[u], index[v]]
            cols += [index[v], index[u]]
            vals += [-1.0, -1.0]
    if not vals:
        return PowerIterationResult(0.0, np.zeros(0), nodes, True, False)
    S = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    shift = 1.0 + float(np.abs(S).sum(axis=1).max())  # >= spectral radius
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(m)
    x /= np.linalg.norm(x)
    rho = float(x @ (S @ x))
    history = [rho]
    converged = False
    for _ in range(max_iter):
        y = S @ x + shift * x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        x = y / norm
        new_rho = float(x @ (S @ x))
        history.append(new_rho)
        if abs(new_rho - rho) < tol:
            rho = new_rho
            converged = True
            break
        rho = new_rho
    peak = int(np.argmax(np.abs(x)))
    if x[peak] < 0:
        x = -x
    return PowerIterationResult(rho, x, nodes, converged, True, history)


def extract_one_group(
    g: SignedGraph,
    active: Sequence[int],
    params: ExtractionParams = ExtractionParams(),
    seed: int = 0,
) -> Optional[OppositiveGroup]:
    """Extract one oppositive group from the active nodes, or None.

    Thresholds the leading eigenvector at tau times its max magnitude, splits
    by entry sign, then greedily drops members while that raises normalized
    cohesion.  Returns None when the eigenvalue is at or below the floor or
    the pruned group is smaller than min_group.
    """
    pi = signed_power_iteration(g, active, params.pi_tol, params.pi_max_iter, seed)
    if not pi.has_edges or pi.eigenvalue <= params.lambda_min:
        return None
    threshold = params.tau * float(np.max(np.abs(pi.vector)))
    signs = {}  # member -> +1/-1
    for i, node in enumerate(pi.nodes):
        if abs(pi.vector[i]) >= threshold and pi.vector[i] != 0.0:
            signs[node] = 1 if pi.vector[i] > 0 else -1
    if not signs:
        return None
    members, quad = _greedy_prune(g, signs)
    if len(members) < params.min_group:
        return None
    p_side = frozenset(v for v in members if signs[v] > 0)
    n_side = frozenset(v for v in members if signs[v] < 0)
    return OppositiveGroup(p_side, n_side, quad / len(members))


def _greedy_prune(g: SignedGraph, signs: dict) -> Tuple[List[int], float]:
    """Drop members while removal strictly raises cohesion per member.

    Maintains r[v] = sum over member neighbors u of S_vu * s_u, so each
    candidate removal is O(1) and an accepted removal is O(deg).  Ties break
    toward the lower node id.
    """
    members = sorted(signs)
    mset = set(members)
    r = {v: 0.0 for v in members}
    quad = 0.0
    for u, v in g.pos_edges | g.neg_edges:
        if u in mset and v in mset:
            s = 1.0 if (u, v) in g.pos_edges else -1.0
            contrib = s * signs[u] * signs[v]
            quad += 2.0 * contrib
            r[u] += s * signs[v]
            r[v] += s * signs[u]
    while len(mset) > 1:
        m = len(mset)
        best_v, best_quad = None, None
        current = quad / m
        for v in sorted(mset):
            # removing v: quad loses both oriented halves of its edges
            quad_v = quad - 2.0 * signs[v] * r[v]
            if quad_v / (m - 1) > current + 1e-12:
                if best_quad is None or quad_v > best_quad:
                    best_v, best_quad = v, quad_v
        if best_v is None:
            break
        mset.remove(best_v)
        quad = best_quad
        for u in g.neighbors[best_v]:
            if u in mset:
                s = 1.0 if g.sign(u, best_v) > 0 else -1.0
                r[u] -= s * signs[best_v]
        del r[best_v]
    return sorted(mset), quad


def extract_groups(
    g: SignedGraph,
    params: ExtractionParams = ExtractionParams(),
    seed: int = 0,
) -> List[OppositiveGroup]:
    """Deflation loop: extract, remove members, repeat; singletons fill in.

    The returned groups are pairwise disjoint and cover V exactly.
    """
    if g.n == 0:
        return []
    max_groups = params.max_groups if params.max_groups is not None else g.n
    active = set(range(g.n))
    groups: List[OppositiveGroup] = []
    round_no = 0
    while active and len(groups) < max_groups:
        group = extract_one_group(
            g, sorted(active), params, derive_seed(seed, "extract", round_no)
        )
        round_no += 1
        if group is None:
            break
        groups.append(group)
        active -= group.members
    for v in sorted(active):
        groups.append(OppositiveGroup(frozenset([v]), frozenset(), 0.0))
    return groups


def groups_to_json(groups: List[OppositiveGroup]) -> list:
    return [
        {"p": sorted(gr.p_side), "n": sorted(gr.n_side), "cohesion": gr.cohesion}
        for gr in groups
    ]


def groups_from_json(data: list) -> List[OppositiveGroup]:
    return [
        OppositiveGroup(frozenset(d["p"]), frozenset(d["n"]), float(d["cohesion"]))
        for d in data
    ]
