"""Shared fixtures and small-graph builders for the test suite."""

import numpy as np
import pytest

from signedshard.graph import SignedGraph


def make_graph(n, pos=(), neg=()):
    """Build a SignedGraph from edge iterables, normalizing pair order."""
    norm = lambda es: frozenset((u, v) if u < v else (v, u) for u, v in es)
    return SignedGraph(n=n, pos_edges=norm(pos), neg_edges=norm(neg))


def random_signed_graph(rng, n_max=50, p_edge=0.2, p_neg=0.4):
    """Erdos-Renyi signed graph for oracle comparisons."""
    n = int(rng.integers(2, n_max + 1))
    pos, neg = set(), set()
    for u in range(n):
        for v in range(u + 1, n):
            r = rng.random()
            if r < p_edge * (1 - p_neg):
                pos.add((u, v))
            elif r < p_edge:
                neg.add((u, v))
    return SignedGraph(n=n, pos_edges=frozenset(pos), neg_edges=frozenset(neg))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
