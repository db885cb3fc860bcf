"""Sparse undirected weighted graphs, Laplacian operators and kNN construction.

Edges are stored as sorted ``(u, v)`` pairs with ``u < v`` and strictly
positive weights; iteration order is always ascending ``(u, v)`` so that
downstream tie-breaking is reproducible. Laplacian and adjacency matrices are
built lazily and cached; instances are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .errors import ConnectivityError, DimensionError, ParameterError


@dataclass(frozen=True)
class EdgeVector:
    """Difference indicator e_p - e_q for a vertex pair (p, q)."""

    p: int
    q: int

    def __post_init__(self):
        if self.p == self.q:
            raise ParameterError("edge endpoints must differ")


class WeightedGraph:
    """Undirected weighted graph with positive edge weights.

    Construction validates: no self loops, no duplicate pairs, weights
    positive and finite. ``edges_u``, ``edges_v``, ``edges_w`` are parallel
    arrays sorted by ascending ``(u, v)``.
    """

    __slots__ = (
        "n", "edges_u", "edges_v", "edges_w",
        "_adj", "_deg", "_lap", "_norm_lap", "_lu", "_edge_index",
    )

    def __init__(self, n: int, edges_u, edges_v, edges_w, validate: bool = True):
        edges_u = np.asarray(edges_u, dtype=np.int64)
        edges_v = np.asarray(edges_v, dtype=np.int64)
        edges_w = np.asarray(edges_w, dtype=np.float64)
        if n < 1:
            raise ParameterError("graph needs at least one vertex")
        if not (edges_u.shape == edges_v.shape == edges_w.shape):
            raise DimensionError("edge arrays must have equal length")
        if validate and edges_u.size:
            if edges_u.min(initial=0) < 0 or edges_v.max(initial=0) >= n:
                raise ParameterError("vertex id out of range")
            if np.any(edges_u >= edges_v):
                raise ParameterError("edges must be stored with u < v (no self loops)")
            if np.any(~np.isfinite(edges_w)) or np.any(edges_w <= 0.0):
                raise ParameterError("edge weights must be positive and finite")
        order = np.lexsort((edges_v, edges_u))
        edges_u, edges_v, edges_w = edges_u[order], edges_v[order], edges_w[order]
        if validate and edges_u.size > 1:
            same = (edges_u[1:] == edges_u[:-1]) & (edges_v[1:] == edges_v[:-1])
            if np.any(same):
                k = int(np.argmax(same))
                raise ParameterError(f"duplicate edge ({edges_u[k]},{edges_v[k]})")
        self.n = int(n)
        self.edges_u = edges_u
        self.edges_v = edges_v
        self.edges_w = edges_w
        self._adj = None
        self._deg = None
        self._lap = None
        self._norm_lap = None
        self._lu = None
        self._edge_index = None

    @classmethod
    def from_edges(cls, n: int, edges) -> "WeightedGraph":
        """Build from an iterable of (u, v, w) triples; (u, v) orientation is free."""
        us, vs, ws = [], [], []
        for u, v, w in edges:
            if u > v:
                u, v = v, u
            us.append(u)
            vs.append(v)
            ws.append(w)
        return cls(n, us, vs, ws)

    @property
    def m(self) -> int:
        return self.edges_u.size

    def adjacency(self) -> sp.csr_matrix:
        if self._adj is None:
            data = np.concatenate([self.edges_w, self.edges_w])
            rows = np.concatenate([self.edges_u, self.edges_v])
            cols = np.concatenate([self.edges_v, self.edges_u])
            self._adj = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        return self._adj

    @property
    def degree_vector(self) -> np.ndarray:
        if self._deg is None:
            deg = np.zeros(self.n, dtype=np.float64)
            np.add.at(deg, self.edges_u, self.edges_w)
            np.add.at(deg, self.edges_v, self.edges_w)
            self._deg = deg
        return self._deg

    def laplacian(self) -> sp.csr_matrix:
        if self._lap is None:
            a = self.adjacency()
            self._lap = sp.diags(self.degree_vector, format="csr") - a
        return self._lap

    def normalized_laplacian(self) -> sp.csr_matrix:
        """Symmetric normalization D^{-1/2} L D^{-1/2} (isolated vertices keep 0 rows)."""
        if self._norm_lap is None:
            deg = self.degree_vector
            inv_sqrt = np.zeros_like(deg)
            nz = deg > 0
            inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
            dhalf = sp.diags(inv_sqrt, format="csr")
            self._norm_lap = dhalf @ self.laplacian() @ dhalf
        return self._norm_lap

    def regularized_lu(self) -> spla.SuperLU:
        """Sparse LU of L + zI with z = 1e-8 * trace(L)/n, cached per instance."""
        if self._lu is None:
            lap = self.laplacian().tocsc()
            z = 1e-8 * (self.degree_vector.sum() / self.n)
            if z <= 0.0:
                z = 1e-8
            self._lu = spla.splu(lap + z * sp.identity(self.n, format="csc"))
        return self._lu

    def neighbors(self, p: int):
        """Neighbor ids and weights of vertex p (CSR row view)."""
        a = self.adjacency()
        lo, hi = a.indptr[p], a.indptr[p + 1]
        return a.indices[lo:hi], a.data[lo:hi]

    def edge_index(self) -> dict:
        """Map (u, v) with u < v to the position in the edge arrays."""
        if self._edge_index is None:
            self._edge_index = {
                (int(u), int(v)): i
                for i, (u, v) in enumerate(zip(self.edges_u, self.edges_v))
            }
        return self._edge_index

    def subgraph_from_edge_indices(self, idx) -> "WeightedGraph":
        idx = np.asarray(idx, dtype=np.int64)
        return WeightedGraph(
            self.n, self.edges_u[idx], self.edges_v[idx], self.edges_w[idx],
            validate=False,
        )

    def with_weights(self, weights) -> "WeightedGraph":
        """Same topology, new weights (aligned with the canonical edge order)."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != self.edges_w.shape:
            raise DimensionError("weight array length mismatch")
        return WeightedGraph(self.n, self.edges_u, self.edges_v, weights)

    def laplacian_quadratic(self, x) -> float:
        """x^T L x = sum over edges of w * (x_u - x_v)^2."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"vector length {x.shape} != ({self.n},)")
        diff = x[self.edges_u] - x[self.edges_v]
        return float(np.dot(self.edges_w, diff * diff))

    def laplacian_apply(self, x) -> np.ndarray:
        """y = L x without materializing L (y_p = d_p x_p - sum_q w_pq x_q)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"vector length {x.shape} != ({self.n},)")
        y = self.degree_vector * x
        np.subtract.at(y, self.edges_u, self.edges_w * x[self.edges_v])
        np.subtract.at(y, self.edges_v, self.edges_w * x[self.edges_u])
        return y

    def is_connected(self) -> bool:
        return int(connected_components(self).max()) == 0 if self.n else True


def connected_components(graph: WeightedGraph) -> np.ndarray:
    """Component id per vertex (0-based, ids ordered by first occurrence)."""
    if graph.m == 0:
        return np.arange(graph.n, dtype=np.int64)
    _, labels = csgraph.connected_components(graph.adjacency(), directed=False)
    return labels.astype(np.int64)


def _pairwise_sq_dists(block: np.ndarray, points: np.ndarray) -> np.ndarray:
    sq = (
        np.sum(block * block, axis=1)[:, None]
        + np.sum(points * points, axis=1)[None, :]
        - 2.0 * block @ points.T
    )
    np.maximum(sq, 0.0, out=sq)
    return sq


def build_knn_graph(
    points,
    k: int,
    kernel: str = "self-tuning",
    sigma: float | None = None,
    self_tuning_rank: int = 7,
    ensure_connected: bool = True,
    block_size: int = 2048,
) -> WeightedGraph:
    """Union-symmetrized kNN graph with a similarity kernel on Euclidean distances.

    kernels:
      - "self-tuning": w_ij = exp(-d_ij^2 / (sigma_i sigma_j)) with sigma_i the
        distance from i to its ``self_tuning_rank``-th nearest neighbor.
      - "gaussian": w_ij = exp(-d_ij^2 / (2 sigma^2)), fixed bandwidth.
      - "reciprocal": w_ij = 1 / d_ij.

    A vertex with duplicate neighbors (sigma_i = 0) falls back to its smallest
    positive distance, then to the global smallest positive distance. Edges
    whose kernel weight underflows to zero are dropped; if the union graph is
    disconnected and ``ensure_connected`` is set, components are stitched by
    adding the closest inter-component point pair along a minimum spanning
    tree of component centroids.
    """
    if hasattr(points, "points"):
        points = points.points
    x = np.asarray(points, dtype=np.float64)
    n, d = x.shape
    if not (1 <= k < n):
        raise ParameterError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    if kernel not in ("self-tuning", "gaussian", "reciprocal"):
        raise ParameterError(f"unknown kernel {kernel!r}")
    if kernel == "gaussian" and (sigma is None or sigma <= 0):
        raise ParameterError("gaussian kernel requires sigma > 0")

    rank = min(self_tuning_rank, n - 1)
    take = max(k, rank) + 1  # +1 accounts for the self distance
    neigh_ids = np.empty((n, k), dtype=np.int64)
    neigh_d2 = np.empty((n, k), dtype=np.float64)
    sigma_loc = np.empty(n, dtype=np.float64)
    min_pos_d2 = np.full(n, np.inf)

    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        sq = _pairwise_sq_dists(x[start:stop], x)
        rows = np.arange(start, stop)
        sq[np.arange(stop - start), rows] = np.inf  # exclude self
        part = np.argpartition(sq, take - 1, axis=1)[:, :take]
        part_d2 = np.take_along_axis(sq, part, axis=1)
        order = np.argsort(part_d2, axis=1, kind="stable")
        part = np.take_along_axis(part, order, axis=1)
        part_d2 = np.take_along_axis(part_d2, order, axis=1)
        neigh_ids[start:stop] = part[:, :k]
        neigh_d2[start:stop] = part_d2[:, :k]
        sigma_loc[start:stop] = np.sqrt(part_d2[:, rank - 1])
        pos = np.where(part_d2 > 0.0, part_d2, np.inf)
        min_pos_d2[start:stop] = pos.min(axis=1)

    # sigma fallbacks for duplicate points
    finite_min = min_pos_d2[np.isfinite(min_pos_d2)]
    global_floor = float(np.sqrt(finite_min.min())) if finite_min.size else 1.0
    zero_sigma = sigma_loc == 0.0
    if np.any(zero_sigma):
        local = np.sqrt(min_pos_d2[zero_sigma])
        local[~np.isfinite(local)] = global_floor
        sigma_loc[zero_sigma] = local

    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = neigh_ids.reshape(-1)
    d2 = neigh_d2.reshape(-1)
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * n + hi
    _, first = np.unique(key, return_index=True)  # union symmetrization
    lo, hi, d2 = lo[first], hi[first], d2[first]

    w = _kernel_weights(d2, lo, hi, kernel, sigma, sigma_loc, global_floor)
    keep = w > 0.0
    graph = WeightedGraph(n, lo[keep], hi[keep], w[keep])

    if ensure_connected:
        graph = _connect_components(graph, x, kernel, sigma, sigma_loc, global_floor)
    return graph


def _kernel_weights(d2, lo, hi, kernel, sigma, sigma_loc, floor):
    if kernel == "self-tuning":
        return np.exp(-d2 / (sigma_loc[lo] * sigma_loc[hi]))
    if kernel == "gaussian":
        return np.exp(-d2 / (2.0 * sigma * sigma))
    dist = np.sqrt(d2)
    dist[dist == 0.0] = floor
    return 1.0 / dist


def _connect_components(graph, x, kernel, sigma, sigma_loc, floor):
    labels = connected_components(graph)
    n_comp = int(labels.max()) + 1
    if n_comp == 1:
        return graph
    centroids = np.vstack([x[labels == c].mean(axis=0) for c in range(n_comp)])
    cd = np.sqrt(_pairwise_sq_dists(centroids, centroids))
    iu, ju = np.triu_indices(n_comp, k=1)
    # +1 keeps coincident centroids representable as explicit (nonzero) entries
    dense = sp.coo_matrix((cd[iu, ju] + 1.0, (iu, ju)), shape=(n_comp, n_comp))
    mst = csgraph.minimum_spanning_tree(dense.tocsr())
    extra = []
    for a, b in zip(*mst.nonzero()):
        ia = np.where(labels == a)[0]
        ib = np.where(labels == b)[0]
        sq = _pairwise_sq_dists(x[ia], x[ib])
        flat = int(np.argmin(sq))
        pa, pb = ia[flat // len(ib)], ib[flat % len(ib)]
        d2 = np.array([sq[flat // len(ib), flat % len(ib)]])
        w = _kernel_weights(
            d2, np.array([pa]), np.array([pb]), kernel, sigma, sigma_loc, floor
        )[0]
        if w <= 0.0:
            w = 1e-300  # kernel underflow on a mandatory bridge edge
        u, v = (pa, pb) if pa < pb else (pb, pa)
        extra.append((int(u), int(v), float(w)))
    edges = list(zip(graph.edges_u, graph.edges_v, graph.edges_w)) + extra
    merged = WeightedGraph.from_edges(graph.n, edges)
    if not merged.is_connected():
        raise ConnectivityError("component repair failed to connect the graph")
    return merged
