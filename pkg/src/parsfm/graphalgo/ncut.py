"""Size-constrained scene clustering by recursive normalized-cut bisection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .components import connected_components

_DENSE_EIG_LIMIT = 512
_EIG_TOL = 1e-8


@dataclass
class Clustering:
    clusters: list  # disjoint vertex sets covering the graph
    max_size: int


def _fiedler_vector(W: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Generalized second eigenvector of (D - W) x = λ D x."""
    inv_sqrt = 1.0 / np.sqrt(d)
    L = np.eye(len(d)) - (W * inv_sqrt[:, None]) * inv_sqrt[None, :]
    L = 0.5 * (L + L.T)
    if len(d) < _DENSE_EIG_LIMIT:
        _, vecs = np.linalg.eigh(L)
        u = vecs[:, 1]
    else:
        from scipy.sparse import csr_matrix
        from scipy.sparse.linalg import eigsh

        _, vecs = eigsh(csr_matrix(L), k=2, sigma=0, which="LM", tol=_EIG_TOL)
        u = vecs[:, 1]
    return inv_sqrt * u


def _ncut_value(W, d, mask):
    cut = W[mask][:, ~mask].sum()
    assoc_a = d[mask].sum()
    assoc_b = d[~mask].sum()
    if assoc_a <= 0 or assoc_b <= 0:
        return np.inf
    return cut / assoc_a + cut / assoc_b


def _best_bisection(vertices, W, d):
    """Split minimizing the Ncut value over sorted-eigenvector thresholds."""
    v = _fiedler_vector(W, d)
    order = np.argsort(v, kind="stable")
    best_mask = None
    best_val = np.inf
    n = len(vertices)
    for cut_at in range(1, n):
        if v[order[cut_at - 1]] == v[order[cut_at]]:
            # identical values cannot be separated by a threshold
            continue
        mask = np.zeros(n, dtype=bool)
        mask[order[:cut_at]] = True
        val = _ncut_value(W, d, mask)
        if val < best_val - 1e-15:
            best_val = val
            best_mask = mask
    if best_mask is None:
        best_mask = np.zeros(n, dtype=bool)
        best_mask[order[: n // 2]] = True
    a = {vertices[i] for i in range(n) if best_mask[i]}
    b = {vertices[i] for i in range(n) if not best_mask[i]}
    return a, b


def normalized_cut(graph, max_size: int) -> Clustering:
    """Divide the match graph into disjoint clusters of at most max_size."""
    if max_size < 2:
        raise ValueError("max_size must be >= 2")
    adj = graph.adjacency()
    clusters = []

    def split(vset):
        if len(vset) <= max_size:
            clusters.append(set(vset))
            return
        sub = graph.subgraph(vset)
        for comp in connected_components(sub):
            if len(comp) <= max_size:
                clusters.append(comp)
                continue
            vertices = sorted(comp)
            idx = {v: i for i, v in enumerate(vertices)}
            W = np.zeros((len(vertices), len(vertices)))
            for v in vertices:
                for u, w in adj[v]:
                    if u in idx:
                        W[idx[v], idx[u]] = w
            d = W.sum(axis=1)
            d = np.maximum(d, 1e-12)
            a, b = _best_bisection(vertices, W, d)
            split(a)
            split(b)

    for comp in connected_components(graph):
        split(comp)
    clusters.sort(key=min)
    return Clustering(clusters, max_size)
