"""Seeded synthetic graphs for sanity runs and property tests."""

from __future__ import annotations

import numpy as np

from .graph import DirectedGraph, NodeData


def directed_sbm(n=200, blocks=2, p_in=0.1, p_out=0.01, seed=0):
    """Directed stochastic block model made strongly connected by a spanning cycle.

    Nodes are assigned to contiguous equal-size blocks. Every ordered pair
    ``(u, v)``, ``u != v``, becomes an edge with probability ``p_in`` inside a
    block and ``p_out`` across blocks. The cycle ``0 -> 1 -> ... -> n-1 -> 0``
    is then added, which crosses blocks only ``blocks`` times.

    Returns ``(graph, node_data)`` with one-hot-free node data (no raw features).
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(blocks), -(-n // blocks))[:n]
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    adj = rng.random((n, n)) < prob
    np.fill_diagonal(adj, False)
    ring = np.arange(n)
    adj[ring, (ring + 1) % n] = True
    src, dst = np.nonzero(adj)
    g = DirectedGraph.from_arrays(n, src, dst, np.ones(len(src)))
    return g, NodeData(labels, np.zeros((n, 0)), blocks)


def random_strongly_connected(n, seed, p=None, weighted=False, self_loops=False):
    """Random digraph on ``n`` nodes guaranteed strongly connected.

    A Hamiltonian cycle over a random permutation plus Erdos-Renyi extra edges
    with probability ``p`` (drawn from [0.05, 0.4] when omitted).
    """
    rng = np.random.default_rng(seed)
    if p is None:
        p = rng.uniform(0.05, 0.4)
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    perm = rng.permutation(n)
    if n > 1:
        adj[perm, np.roll(perm, -1)] = True
    if self_loops:
        np.fill_diagonal(adj, True)
    src, dst = np.nonzero(adj)
    w = rng.uniform(0.1, 5.0, size=len(src)) if weighted else np.ones(len(src))
    return DirectedGraph.from_arrays(n, src, dst, w)


def random_symmetric_connected(n, seed, p=None, weighted=False):
    """Random connected undirected graph stored with both edge directions."""
    rng = np.random.default_rng(seed)
    if p is None:
        p = rng.uniform(0.05, 0.4)
    upper = np.triu(rng.random((n, n)) < p, 1)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        upper[min(a, b), max(a, b)] = True
    w = np.where(upper, rng.uniform(0.1, 5.0, size=(n, n)) if weighted else 1.0, 0.0)
    w = w + w.T
    src, dst = np.nonzero(w)
    return DirectedGraph.from_arrays(n, src, dst, w[src, dst])
