"""k-nearest-neighbor graphs on sphere samplings and their combinatorial Laplacians.

Two edge-weight schemes are supported: inverse chordal distance w = 1/|x_i - x_j|
and the Gaussian kernel w = exp(-|x_i - x_j|^2 / (4 t)). The Laplacian is the
combinatorial L = D - A; no normalization is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import InvalidArgumentError, NumericalFailureError, SingularWeightError
from .samplings import Sampling

WEIGHT_KINDS = ("inverse-distance", "gaussian")
KERNEL_HEURISTICS = ("half-mean-square", "mean-distance")


@dataclass(frozen=True)
class WeightScheme:
    """Edge weighting: 'inverse-distance' (no parameter) or 'gaussian' with width t."""

    kind: str
    kernel_width: Optional[float] = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise InvalidArgumentError(f"unknown weight kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.kernel_width is None or not self.kernel_width > 0:
                raise InvalidArgumentError("gaussian weights need kernel_width > 0")
        elif self.kernel_width is not None:
            raise InvalidArgumentError("inverse-distance weights carry no kernel width")


@dataclass(frozen=True)
class Graph:
    """Symmetric weighted kNN graph: adjacency (CSR), degrees, and the k used to build it."""

    n: int
    adjacency: sp.csr_matrix
    degrees: np.ndarray
    k: int
    weights: WeightScheme


def knn_edges(s: Sampling, k: int) -> np.ndarray:
    """(n, k) indices of each vertex's k nearest neighbors by chordal distance.

    Self-pairs are excluded. Ties are broken deterministically toward the
    lower index. The result is directed; build_graph symmetrizes by union.
    """
    n = s.n
    if not 1 <= k < n:
        raise InvalidArgumentError(f"need 1 <= k < n, got k={k}, n={n}")
    tree = cKDTree(s.points)
    # query a few extra neighbors so equidistant ties can be re-ranked by index
    kq = min(n, k + 9)
    _, idx = tree.query(s.points, k=kq)
    diffs = s.points[idx] - s.points[:, None, :]
    d2 = np.einsum("ijk,ijk->ij", diffs, diffs)
    d2[idx == np.arange(n)[:, None]] = -1.0  # self first, dropped below
    order = np.lexsort((idx, d2), axis=1)
    rows = np.arange(n)[:, None]
    return idx[rows, order][:, 1 : k + 1].astype(np.int64)


def _pair_distances(s: Sampling, neighbors: np.ndarray) -> np.ndarray:
    diffs = s.points[neighbors] - s.points[:, None, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs))


_TIE_REL_TOL = 1e-12


def knn_support(s: Sampling, k: int):
    """Directed edge support (rows, cols, dists): all neighbors within the
    k-th-nearest distance, ties included.

    Including every vertex tied with the k-th distance keeps the support a
    pure function of pairwise distances, so any rotation that permutes the
    sampling permutes the graph exactly. Vertices at tie boundaries may select
    slightly more than k neighbors.
    """
    n = s.n
    if not 1 <= k < n:
        raise InvalidArgumentError(f"need 1 <= k < n, got k={k}, n={n}")
    tree = cKDTree(s.points)
    pad = 16
    while True:
        kq = min(n, k + 1 + pad)
        dist, idx = tree.query(s.points, k=kq)
        thresh = dist[:, k] * (1.0 + _TIE_REL_TOL)
        if kq == n or not np.any(dist[:, -1] <= thresh):
            break
        pad *= 2  # a tie group straddles the query window; widen it
    keep = (dist <= thresh[:, None]) & (idx != np.arange(n)[:, None])
    rows = np.repeat(np.arange(n, dtype=np.int64), keep.sum(axis=1))
    cols = idx[keep]
    diffs = s.points[rows] - s.points[cols]
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    return rows, cols, dists


def _weights_from_distances(dists: np.ndarray, w: WeightScheme) -> np.ndarray:
    if np.any(dists < 1e-14):
        if w.kind == "inverse-distance":
            raise SingularWeightError("coincident points give singular 1/d weights")
        raise InvalidArgumentError("coincident points in sampling")
    if w.kind == "inverse-distance":
        return 1.0 / dists
    return np.exp(-(dists**2) / (4.0 * w.kernel_width))


def _assemble(n: int, rows, cols, vals, k: int, w: WeightScheme) -> Graph:
    a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    a = a.maximum(a.T)  # union symmetrization; weights are distance-determined
    a.setdiag(0.0)
    a.eliminate_zeros()
    degrees = np.asarray(a.sum(axis=1)).ravel()
    return Graph(n, a, degrees, k, w)


def build_graph(s: Sampling, k: int, w: WeightScheme) -> Graph:
    """Weighted kNN graph, union-symmetrized, self-loops excluded.

    The support comes from knn_support, so it is determined by pairwise
    distances alone (k-th-distance ties are all kept).
    """
    rows, cols, dists = knn_support(s, k)
    return _assemble(s.n, rows, cols, _weights_from_distances(dists, w), k, w)


def laplacian(g: Graph) -> sp.csr_matrix:
    """Combinatorial Laplacian L = D - A (sparse, symmetric, PSD)."""
    lap = (sp.diags(g.degrees) - g.adjacency).tocsr()
    lap.sum_duplicates()
    return lap


class GaussianGraphFamily:
    """kNN structure computed once, Gaussian Laplacians built for many widths.

    Kernel-width searches evaluate dozens of widths on one sampling; the
    neighbor sets and distances do not depend on t, so they are cached here.
    """

    def __init__(self, s: Sampling, k: int):
        self.sampling = s
        self.k = k
        self._rows, self._cols, self._dists = knn_support(s, k)

    def graph(self, t: float) -> Graph:
        if not t > 0:
            raise InvalidArgumentError("gaussian kernel width must be positive")
        vals = _weights_from_distances(self._dists, WeightScheme("gaussian", t))
        return _assemble(self.sampling.n, self._rows, self._cols, vals,
                         self.k, WeightScheme("gaussian", t))

    def laplacian(self, t: float) -> sp.csr_matrix:
        return laplacian(self.graph(t))


def heuristic_kernel_width(s: Sampling, k: int, kind: str = "half-mean-square") -> float:
    """Data-driven Gaussian kernel width.

    'half-mean-square' is half the average squared chordal distance over
    directed kNN pairs; 'mean-distance' is the plain average distance. Both
    conventions appear in practice, so each is exposed under its own name.
    """
    if kind not in KERNEL_HEURISTICS:
        raise InvalidArgumentError(f"unknown heuristic {kind!r}")
    neighbors = knn_edges(s, k)
    dist = _pair_distances(s, neighbors)
    if kind == "half-mean-square":
        return float(0.5 * np.mean(dist**2))
    return float(np.mean(dist))


def largest_eigenvalue(L, tol: float = 1e-6, max_iter: int = 20000) -> float:
    """Largest eigenvalue of a symmetric PSD operator, upper-biased.

    Graph Laplacians on near-uniform samplings have a tightly clustered top
    spectrum, which defeats single-vector power iteration, so the estimate
    comes from Lanczos (deterministic start vector) with a block-power-
    iteration fallback. The residual of the converged Ritz pair is added and
    the result inflated by (1 + tol) so Chebyshev scaling stays valid.
    Raises NumericalFailureError if neither method converges.
    """
    import scipy.sparse.linalg as spla

    n = L.shape[0]
    if n == 0:
        return 0.0
    if sp.issparse(L) and L.nnz == 0:
        return 0.0
    if n <= 32:
        dense = L.toarray() if sp.issparse(L) else np.asarray(L)
        return float(np.linalg.eigvalsh(dense).max()) * (1.0 + tol)
    v0 = np.cos(np.arange(n, dtype=np.float64) + 0.5)
    try:
        k = min(6, n - 1)
        vals, vecs = spla.eigsh(
            L, k=k, which="LA", tol=0.1 * tol, v0=v0,
            ncv=min(n, max(4 * k + 1, 40)), maxiter=max_iter,
        )
        i = int(np.argmax(vals))
        theta = float(vals[i])
        res = float(np.linalg.norm(L @ vecs[:, i] - theta * vecs[:, i]))
        return (theta + res) * (1.0 + tol)
    except spla.ArpackError:
        return _block_power_largest(L, tol, max_iter)


def _block_power_largest(L, tol: float, max_iter: int, block: int = 12) -> float:
    n = L.shape[0]
    rng = np.random.default_rng(0x5EED)
    V = np.linalg.qr(rng.standard_normal((n, min(block, n))))[0]
    theta, res = 0.0, np.inf
    for _ in range(max_iter):
        W = L @ V
        evals, U = np.linalg.eigh(V.T @ W)
        theta = float(evals[-1])
        res = float(np.linalg.norm(W @ U[:, -1] - theta * (V @ U[:, -1])))
        if theta == 0.0 and np.linalg.norm(W) == 0.0:
            return 0.0
        if res <= tol * abs(theta):
            return (theta + res) * (1.0 + tol)
        V = np.linalg.qr(W)[0]
    raise NumericalFailureError(
        "largest-eigenvalue iteration did not converge",
        {"iterations": max_iter, "last_estimate": theta, "residual": res, "tolerance": tol},
    )
