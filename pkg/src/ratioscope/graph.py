"""kNN Gaussian similarity graph over pooled samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateData, InvalidK


@dataclass(frozen=True)
class SimilarityGraph:
    """Sparse symmetric nonnegative sample-similarity weights.

    ``weights`` is (m x m) CSR with zero diagonal and entries in [0, 1];
    row i holds at most 2K nonzeros (K out-neighbors plus
    symmetrization fill-in).
    """

    weights: sp.csr_matrix
    k_neighbors: int
    sigma2: float

    @property
    def m(self) -> int:
        return self.weights.shape[0]


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between columns of a and b."""
    a2 = np.sum(a * a, axis=0)
    b2 = np.sum(b * b, axis=0)
    d2 = a2[:, None] + b2[None, :] - 2.0 * (a.T @ b)
    return np.maximum(d2, 0.0)


def median_heuristic(data: np.ndarray) -> float:
    """Median pairwise Euclidean distance over distinct unordered pairs."""
    data = np.asarray(data, dtype=float)
    m = data.shape[1]
    if m < 2:
        raise DegenerateData("median heuristic needs at least 2 samples")
    d2 = pairwise_sq_dists(data, data)
    iu = np.triu_indices(m, k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    if med == 0.0:
        raise DegenerateData("median pairwise distance is zero (all points coincide)")
    return med


def knn_graph(data: np.ndarray, K: int, sigma2: float) -> SimilarityGraph:
    """Symmetrized K-nearest-neighbor Gaussian similarity graph.

    Directed weights exp(-||x_i - x_j||^2 / (2 sigma2)) to the K nearest
    neighbors of each column (self excluded, distance ties broken by
    smaller index), then symmetrized by averaging with the transpose.
    """
    data = np.asarray(data, dtype=float)
    m = data.shape[1]
    if K <= 0 or K >= m:
        raise InvalidK(f"K must satisfy 1 <= K < m, got K={K}, m={m}")
    if sigma2 <= 0:
        raise InvalidK(f"sigma2 must be positive, got {sigma2}")
    d2 = pairwise_sq_dists(data, data)
    np.fill_diagonal(d2, np.inf)
    # stable argsort keeps the smaller index on distance ties
    order = np.argsort(d2, axis=1, kind="stable")[:, :K]
    rows = np.repeat(np.arange(m), K)
    cols = order.ravel()
    vals = np.exp(-d2[rows, cols] / (2.0 * sigma2))
    w = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    w = (w + w.T) * 0.5
    w.setdiag(0.0)
    w.eliminate_zeros()
    return SimilarityGraph(weights=w.tocsr(), k_neighbors=K, sigma2=float(sigma2))


def dump_graph_csv(path, graph: SimilarityGraph) -> None:
    """Debug dump of (i, j, r_ij) triples for the nonzero weights."""
    coo = graph.weights.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,j,r_ij\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i},{j},{v!r}\n")
