"""Reference shard model: signed spectral embeddings + logistic sign classifier.

Each shard trains independently and deterministically: node embeddings are
the leading eigenvectors (by magnitude) of the shard's signed adjacency,
found by shifted power iteration with orthogonal deflation; edge features
combine the endpoint embeddings with scaled degree counts; a class-weighted
logistic model is fit by full-batch gradient descent from a seeded init.
Any object with the same train/predict/prior surface can stand in for it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .graph import SignedGraph

_RANK_TOL = 1e-9  # |eigenvalue| below this counts as no remaining structure


@dataclass(frozen=True)
class ModelHyperparams:
    embed_dim: int = 16
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim < 1 or self.epochs < 1:
            raise ValueError("embed_dim and epochs must be at least 1")
        if self.learning_rate <= 0 or self.l2 < 0:
            raise ValueError("learning_rate must be positive and l2 non-negative")


@dataclass(frozen=True)
class ShardModel:
    """Trained per-shard state; immutable once built.

    `nodes` are the ids the model answers for (original graph ids when
    trained inside the ensemble); everything else is indexed shard-locally.
    """

    d: int
    prior: float
    weights: np.ndarray  # length 2d+4
    bias: float
    nodes: Tuple[int, ...]
    embeddings: np.ndarray  # len(nodes) x d
    pos_deg: np.ndarray
    neg_deg: np.ndarray
    deg_scale: float
    feat_mean: np.ndarray  # per-feature standardization, fit on train edges
    feat_std: np.ndarray
    prior_only: bool
    train_edges: Tuple[Tuple[int, int], ...]  # pairs in `nodes` id space
    loss_history: Tuple[float, ...] = field(default=(), compare=False)

    @property
    def node_index(self) -> Dict[int, int]:
        return {v: i for i, v in enumerate(self.nodes)}

    def to_json(self) -> dict:
        return {
            "prior": float(self.prior),
            "d": self.d,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "nodes": list(self.nodes),
            "embeddings": [[float(x) for x in row] for row in self.embeddings],
            "pos_deg": [int(x) for x in self.pos_deg],
            "neg_deg": [int(x) for x in self.neg_deg],
            "deg_scale": float(self.deg_scale),
            "feat_mean": [float(x) for x in self.feat_mean],
            "feat_std": [float(x) for x in self.feat_std],
            "prior_only": self.prior_only,
            "train_edges": [list(e) for e in self.train_edges],
        }

    @staticmethod
    def from_json(data: dict) -> "ShardModel":
        nodes = tuple(int(v) for v in data["nodes"])
        d = int(data["d"])
        emb = np.array(data["embeddings"], dtype=np.float64)
        if emb.size == 0:
            emb = np.zeros((len(nodes), d))
        return ShardModel(
            d=d,
            prior=float(data["prior"]),
            weights=np.array(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            nodes=nodes,
            embeddings=emb,
            pos_deg=np.array(data["pos_deg"], dtype=np.int64),
            neg_deg=np.array(data["neg_deg"], dtype=np.int64),
            deg_scale=float(data["deg_scale"]),
            feat_mean=np.array(data["feat_mean"], dtype=np.float64),
            feat_std=np.array(data["feat_std"], dtype=np.float64),
            prior_only=bool(data["prior_only"]),
            train_edges=tuple((int(u), int(v)) for u, v in data["train_edges"]),
        )


def spectral_embed(
    g: SignedGraph,
    d: int,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 150,
) -> np.ndarray:
    """Top-d eigenvectors of the signed adjacency, ordered by |eigenvalue|.

    Uses two shifted power-iteration chains (S + cI for the algebraic top,
    cI - S for the bottom) with orthogonal deflation against all found
    vectors, picking whichever end has the larger magnitude each step (ties
    go to the positive end).  Columns are unit norm with the largest-
    magnitude entry positive; isolated nodes get exact zeros and columns
    beyond the matrix rank stay zero.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    emb = np.zeros((g.n, d))
    degree = g.pos_degree + g.neg_degree
    active = np.flatnonzero(degree > 0)
    if active.size == 0:
        return emb
    S = g.signed_adjacency()[active][:, active].toarray()
    shift = 1.0 + float(np.abs(S).sum(axis=1).max())
    rng = np.random.default_rng(seed)
    basis: List[np.ndarray] = []
    for j in range(min(d, active.size)):
        top = _deflated_extreme(S, shift, basis, rng, tol, max_iter, top=True)
        bot = _deflated_extreme(S, shift, basis, rng, tol, max_iter, top=False)
        lam, x = top
        if bot[1] is not None and (x is None or abs(bot[0]) > abs(lam)):
            lam, x = bot
        if x is None or abs(lam) <= _RANK_TOL:
            break
        peak = int(np.argmax(np.abs(x)))
        if x[peak] < 0:
            x = -x
        basis.append(x)
        emb[active, j] = x
    return emb


def _deflated_extreme(S, shift, basis, rng, tol, max_iter, top: bool):
    """Next extreme eigenpair of S orthogonal to `basis`.

    Power-iterates the positive-semidefinite shift of S (or of -S for the
    bottom end), re-orthogonalizing against the basis every step.  Returns
    (rayleigh quotient of S, vector) or (0.0, None) when the basis already
    spans the space.
    """
    m = S.shape[0]
    x = rng.standard_normal(m)
    x = _orthogonalize(x, basis)
    norm = np.linalg.norm(x)
    if norm < 1e-12:
        return 0.0, None
    x /= norm
    sign = 1.0 if top else -1.0
    rho = float(x @ (S @ x))
    for _ in range(max_iter):
        y = sign * (S @ x) + shift * x
        y = _orthogonalize(y, basis)
        norm = np.linalg.norm(y)
        if norm < 1e-12:
            return 0.0, None
        x = y / norm
        new_rho = float(x @ (S @ x))
        if abs(new_rho - rho) < tol:
            rho = new_rho
            break
        rho = new_rho
    x = _orthogonalize(x, basis)
    norm = np.linalg.norm(x)
    if norm < 1e-12:
        return 0.0, None
    return rho, x / norm


def _orthogonalize(x: np.ndarray, basis: List[np.ndarray]) -> np.ndarray:
    for _ in range(2):  # twice for numerical hygiene
        for b in basis:
            x = x - (b @ x) * b
    return x


def edge_features(
    emb: np.ndarray,
    g: SignedGraph,
    u: int,
    v: int,
    pos_deg: Optional[np.ndarray] = None,
    neg_deg: Optional[np.ndarray] = None,
    deg_scale: Optional[float] = None,
) -> np.ndarray:
    """Feature vector for the unordered pair {u, v}: length 2d+4.

    Concatenates the elementwise product and sum of the endpoint embeddings
    with the endpoints' positive/negative degrees, each degree scaled by
    1/(1 + max combined degree).  Endpoints are ordered u < v so the result
    is orientation-independent.
    """
    if u == v:
        raise ValueError("self-pairs have no features")
    if pos_deg is None:
        pos_deg = g.pos_degree
    if neg_deg is None:
        neg_deg = g.neg_degree
    if deg_scale is None:
        total = pos_deg + neg_deg
        deg_scale = 1.0 / (1.0 + (float(total.max()) if len(total) else 0.0))
    a, b = (u, v) if u < v else (v, u)
    za, zb = emb[a], emb[b]
    degs = np.array(
        [pos_deg[a], neg_deg[a], pos_deg[b], neg_deg[b]], dtype=np.float64
    )
    return np.concatenate([za * zb, za + zb, degs * deg_scale])


def weighted_logistic_loss(
    wb: np.ndarray, X: np.ndarray, y: np.ndarray, sample_w: np.ndarray, l2: float
) -> float:
    """Mean class-weighted cross-entropy plus (l2/2)*|w|^2 (bias excluded)."""
    w, b = wb[:-1], wb[-1]
    z = X @ w + b
    # log(1+exp(z)) - y*z, computed stably
    ce = np.logaddexp(0.0, z) - y * z
    return float(np.mean(sample_w * ce) + 0.5 * l2 * (w @ w))


def weighted_logistic_grad(
    wb: np.ndarray, X: np.ndarray, y: np.ndarray, sample_w: np.ndarray, l2: float
) -> np.ndarray:
    w, b = wb[:-1], wb[-1]
    p = expit(X @ w + b)
    err = sample_w * (p - y) / X.shape[0]
    grad_w = X.T @ err + l2 * w
    grad_b = np.sum(err)
    return np.concatenate([grad_w, [grad_b]])


def train_shard(
    shard_graph: SignedGraph,
    hp: ModelHyperparams,
    nodes: Optional[Sequence[int]] = None,
) -> ShardModel:
    """Fit the reference model on one shard's induced subgraph.

    `nodes` names the shard's members in the caller's id space (position i
    is shard-local node i); defaults to the shard-local ids.  Training is
    full-batch gradient descent for a fixed epoch count from a seeded
    uniform(-0.01, 0.01) init, so results are bit-reproducible.
    """
    node_ids = tuple(nodes) if nodes is not None else tuple(range(shard_graph.n))
    if len(node_ids) != shard_graph.n:
        raise ValueError("nodes must name every shard-local node")
    d = hp.embed_dim
    edges = shard_graph.edges()
    pos_deg, neg_deg = shard_graph.pos_degree, shard_graph.neg_degree
    total = pos_deg + neg_deg
    deg_scale = 1.0 / (1.0 + (float(total.max()) if shard_graph.n else 0.0))
    n_pos = len(shard_graph.pos_edges)
    m = len(edges)
    prior = (n_pos + 1.0) / (m + 2.0)  # add-one smoothed positive fraction
    if m == 0:
        return ShardModel(
            d=d,
            prior=prior,
            weights=np.zeros(2 * d + 4),
            bias=0.0,
            nodes=node_ids,
            embeddings=np.zeros((shard_graph.n, d)),
            pos_deg=pos_deg,
            neg_deg=neg_deg,
            deg_scale=deg_scale,
            feat_mean=np.zeros(2 * d + 4),
            feat_std=np.ones(2 * d + 4),
            prior_only=True,
            train_edges=(),
        )
    emb = spectral_embed(shard_graph, d, seed=hp.seed)
    X = np.array(
        [
            edge_features(emb, shard_graph, u, v, pos_deg, neg_deg, deg_scale)
            for u, v, _ in edges
        ]
    )
    y = np.array([1.0 if s > 0 else 0.0 for _, _, s in edges])
    feat_mean = X.mean(axis=0)
    feat_std = X.std(axis=0)
    feat_std = np.where(feat_std < 1e-12, 1.0, feat_std)
    X = (X - feat_mean) / feat_std
    n_neg = m - n_pos
    sample_w = np.ones(m)
    if n_pos > 0 and n_neg > 0:
        sample_w = np.where(y == 1.0, m / (2.0 * n_pos), m / (2.0 * n_neg))
    rng = np.random.default_rng(hp.seed)
    wb = rng.uniform(-0.01, 0.01, size=2 * d + 5)
    losses = []
    for _ in range(hp.epochs):
        losses.append(weighted_logistic_loss(wb, X, y, sample_w, hp.l2))
        wb = wb - hp.learning_rate * weighted_logistic_grad(wb, X, y, sample_w, hp.l2)
    losses.append(weighted_logistic_loss(wb, X, y, sample_w, hp.l2))
    return ShardModel(
        d=d,
        prior=prior,
        weights=wb[:-1],
        bias=float(wb[-1]),
        nodes=node_ids,
        embeddings=emb,
        pos_deg=pos_deg,
        neg_deg=neg_deg,
        deg_scale=deg_scale,
        feat_mean=feat_mean,
        feat_std=feat_std,
        prior_only=False,
        train_edges=tuple(
            (node_ids[u], node_ids[v]) for u, v, _ in edges
        ),
        loss_history=tuple(losses),
    )


def predict(model: ShardModel, u: int, v: int) -> float:
    """Probability that edge {u, v} is positive; prior for unknown endpoints."""
    idx = model.node_index
    if model.prior_only or u not in idx or v not in idx:
        return model.prior
    a, b = idx[u], idx[v]
    feats = edge_features(
        model.embeddings,
        None,
        *((a, b) if a < b else (b, a)),
        pos_deg=model.pos_deg,
        neg_deg=model.neg_deg,
        deg_scale=model.deg_scale,
    )
    feats = (feats - model.feat_mean) / model.feat_std
    return float(expit(model.weights @ feats + model.bias))
