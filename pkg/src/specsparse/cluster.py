"""k-means on spectral embeddings and the end-to-end spectral clustering path."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graph import WeightedGraph
from . import eig as eigmod


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations_run: int
    seed: int


def _kmeans_pp_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a centroid; pick uniformly
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total))
            idx = min(idx, n - 1)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int):
    n, k = points.shape[0], centroids.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    it = 0
    for it in range(1, max_iter + 1):
        d2 = (
            np.sum(points * points, axis=1)[:, None]
            - 2.0 * points @ centroids.T
            + np.sum(centroids * centroids, axis=1)[None, :]
        )
        new_assign = np.argmin(d2, axis=1)
        for j in range(k):
            members = new_assign == j
            if not members.any():
                # re-seed an emptied centroid at the point farthest from its own
                farthest = int(np.argmax(d2[np.arange(n), new_assign]))
                centroids[j] = points[farthest]
                new_assign[farthest] = j
                members = new_assign == j
            centroids[j] = points[members].mean(axis=0)
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    d2 = np.sum((points - centroids[assign]) ** 2, axis=1)
    return assign, centroids, float(d2.sum()), it


def kmeans(
    points,
    k: int,
    restarts: int = 10,
    max_iter: int = 300,
    seed: int = 0,
) -> KMeansResult:
    """Lloyd iterations with k-means++ seeding, best of ``restarts`` by inertia.

    Empty clusters are repaired by re-seeding the emptied centroid at the
    point farthest from its current centroid. Ties between restarts go to the
    lower restart index, so results are deterministic for a fixed seed.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ParameterError("points must be a 2-d array")
    if not (1 <= k <= points.shape[0]):
        raise ParameterError(f"k must satisfy 1 <= k <= n, got {k}")
    if not np.all(np.isfinite(points)):
        raise ParameterError("points must be finite")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng((seed, r))
        centroids = _kmeans_pp_init(points, k, rng)
        assign, cents, inertia, iters = _lloyd(points, centroids.copy(), max_iter)
        if best is None or inertia < best.inertia:
            best = KMeansResult(assign, cents, inertia, iters, seed)
    return best


def spectral_cluster(
    graph: WeightedGraph,
    k: int,
    normalized: bool = True,
    row_normalize: bool = True,
    filter_against: WeightedGraph | None = None,
    gamma: float = 0.7,
    n_filter: int = 10,
    eig_tol: float = 1e-8,
    eig_max_iter: int = 1000,
    restarts: int = 10,
    kmeans_max_iter: int = 300,
    seed: int = 0,
    source: str = "",
):
    """Embed with the bottom-k nontrivial Laplacian eigenvectors and k-means them.

    When clustering a sparsifier, pass the original graph as
    ``filter_against`` to smooth the eigenvectors with the weighted-Jacobi
    filter before clustering. Returns (labels, embedding, timing dict with
    eigensolve/filter/kmeans seconds).
    """
    if k < 2:
        raise ParameterError("need at least 2 clusters")
    timings = {}
    t0 = time.perf_counter()
    embedding = eigmod.bottom_eigenpairs(
        graph, k, normalized=normalized, tol=eig_tol, max_iter=eig_max_iter,
        seed=seed, source=source,
    )
    timings["eigensolve_seconds"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if filter_against is not None:
        embedding = eigmod.filter_eigenvectors(
            filter_against, embedding, gamma=gamma, n_filter=n_filter
        )
    timings["filter_seconds"] = time.perf_counter() - t0

    points = embedding.vectors
    if row_normalize:
        norms = np.linalg.norm(points, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        points = points / norms

    t0 = time.perf_counter()
    result = kmeans(points, k, restarts=restarts, max_iter=kmeans_max_iter, seed=seed)
    timings["kmeans_seconds"] = time.perf_counter() - t0
    return result.assignments, embedding, timings
