"""Bottom eigenpairs of graph Laplacians and iterative eigenvector filtering.

The eigensolver is a shift-regularized block inverse iteration: factor
L + zI once (z = 1e-8 * trace(L)/n), repeatedly solve against the block,
deflate the trivial eigenvector, re-orthonormalize, and extract Ritz pairs.
Any solver meeting the same contract (residual norms below tol * ||L||_inf,
pairwise orthogonality, trivial-vector deflation) could be substituted.

The filter is a weighted-Jacobi relaxation acting as a low-pass graph filter:
errors introduced by eigensolves on a sparsified Laplacian live mostly in the
high end of the original graph's spectrum, where the relaxation damps fastest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConnectivityError,
    ConvergenceError,
    NumericalError,
    ParameterError,
)
from .graph import WeightedGraph, connected_components

log = logging.getLogger(__name__)


@dataclass
class SpectralEmbedding:
    """Bottom-k nontrivial eigenpairs of a graph Laplacian.

    ``eigenvalues`` ascend; column j of ``vectors`` is the unit eigenvector for
    eigenvalue j, orthogonal to the trivial eigenvector (all-ones for the
    unnormalized Laplacian, D^{1/2} 1 for the symmetric-normalized one).
    ``residuals[j]`` is ||(L - eigenvalue_j I) vector_j||_2.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    normalized: bool
    source: str = ""
    residuals: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.vectors.shape[1]


def _trivial_vector(graph: WeightedGraph, normalized: bool) -> np.ndarray:
    if normalized:
        v = np.sqrt(graph.degree_vector)
    else:
        v = np.ones(graph.n)
    return v / np.linalg.norm(v)


def bottom_eigenpairs(
    graph: WeightedGraph,
    k: int,
    normalized: bool = True,
    tol: float = 1e-8,
    max_iter: int = 1000,
    seed: int = 0,
    initial_block: np.ndarray | None = None,
    source: str = "",
) -> SpectralEmbedding:
    """k smallest nontrivial eigenpairs of the (normalized) Laplacian.

    Block inverse iteration with Rayleigh-Ritz extraction each sweep;
    converged when every requested residual is below tol * ||L||_inf.
    Deterministic for a fixed seed (and fixed ``initial_block`` if given).
    """
    n = graph.n
    if not (1 <= k < n):
        raise ParameterError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    if int(connected_components(graph).max()) != 0:
        raise ConnectivityError("eigensolver requires a connected graph")

    lap = graph.normalized_laplacian() if normalized else graph.laplacian()
    lap = lap.tocsr()
    norm_inf = float(abs(lap).sum(axis=1).max())
    trivial = _trivial_vector(graph, normalized)

    z = 1e-8 * (lap.diagonal().sum() / n)
    lu = spla.splu((lap + z * sp.identity(n, format="csr")).tocsc())

    b = min(n - 1, k + 5)
    max_block = min(n - 1, k + 45)
    rng = np.random.default_rng(seed)
    block = rng.standard_normal((n, b))
    if initial_block is not None:
        m = min(initial_block.shape[1], b)
        block[:, :m] = initial_block[:, :m]

    theta = None
    res = np.full(k, np.inf)
    threshold = tol * norm_inf
    stall_anchor = np.inf
    stall_sweep = 0
    for sweep in range(max_iter):
        block -= np.outer(trivial, trivial @ block)
        block, _ = np.linalg.qr(block)
        lb = lap @ block
        small = block.T @ lb
        small = 0.5 * (small + small.T)
        vals, rot = np.linalg.eigh(small)
        block = block @ rot
        lb = lb @ rot
        theta = vals
        res = np.linalg.norm(lb[:, :k] - block[:, :k] * theta[:k], axis=0)
        if res.max() <= threshold:
            break
        # A residual that stops shrinking means an eigenvalue bundle straddles
        # the block boundary (inverse iteration cannot separate near-equal
        # eigenvalues); widen the block until the bundle fits.
        if sweep - stall_sweep >= 15:
            if res.max() > 0.25 * stall_anchor and block.shape[1] < max_block:
                extra = min(k + 5, max_block - block.shape[1])
                block = np.hstack([block, rng.standard_normal((n, extra))])
            stall_anchor = res.max()
            stall_sweep = sweep
        block = lu.solve(block)
        if not np.all(np.isfinite(block)):
            raise NumericalError("inverse iteration produced non-finite block")
    else:
        raise ConvergenceError(
            f"eigensolver did not reach tol={tol:g} within {max_iter} sweeps "
            f"(best residuals {res})",
            residuals=res,
        )

    vectors = block[:, :k]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return SpectralEmbedding(
        eigenvalues=theta[:k].copy(),
        vectors=vectors,
        normalized=normalized,
        source=source,
        residuals=res.copy(),
    )


def eigenvalue_variation_ratio(v_prev, v_curr) -> float:
    """||v_prev - v_curr|| / ||v_prev|| between successive eigenvalue vectors."""
    v_prev = np.asarray(v_prev, dtype=np.float64)
    v_curr = np.asarray(v_curr, dtype=np.float64)
    if v_prev.shape != v_curr.shape:
        raise ParameterError("eigenvalue vectors must have equal length")
    denom = np.linalg.norm(v_prev)
    if denom == 0.0:
        raise ParameterError("previous eigenvalue vector must be nonzero")
    return float(np.linalg.norm(v_prev - v_curr) / denom)


def filter_eigenvectors(
    G: WeightedGraph,
    embedding: SpectralEmbedding,
    gamma: float = 0.7,
    n_filter: int = 10,
) -> SpectralEmbedding:
    """Weighted-Jacobi smoothing of approximate eigenvectors against graph G.

    Per column j with eigenvalue estimate zeta_j, applies

        omega <- (1 - gamma) * omega + gamma * (D_G - zeta_j I)^{-1} A_G omega

    for ``n_filter`` sweeps, re-orthogonalizing against the trivial eigenvector
    and renormalizing after each sweep. An exact eigenpair of L_G is a fixed
    point. Eigenvectors of a normalized Laplacian are filtered in unnormalized
    coordinates (omega' = D^{-1/2} omega) and transformed back. Residuals are
    recomputed against G's Laplacian (in the embedding's normalization).
    The input embedding is not modified.
    """
    if not (0.0 < gamma <= 1.0):
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    if n_filter < 1:
        raise ParameterError("n_filter must be >= 1")
    deg = G.degree_vector
    adj = G.adjacency()
    zetas = np.asarray(embedding.eigenvalues, dtype=np.float64)
    vectors = np.array(embedding.vectors, dtype=np.float64, copy=True)
    if vectors.shape[0] != G.n:
        raise ParameterError("embedding size does not match the graph")

    if embedding.normalized:
        inv_sqrt = np.zeros_like(deg)
        nz = deg > 0
        inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
        work = vectors * inv_sqrt[:, None]
    else:
        work = vectors
    ones_trivial = np.ones(G.n) / np.sqrt(G.n)

    filtered = np.empty_like(work)
    for j in range(work.shape[1]):
        zeta = float(zetas[j])
        denom = deg - zeta
        if np.any(denom == 0.0):
            shift = 1e-12 * float(np.abs(deg).max())
            log.warning(
                "degree equals eigenvalue estimate %.6g; shifting by %.3g", zeta, shift
            )
            zeta -= shift
            denom = deg - zeta
        col = work[:, j].copy()
        for _ in range(n_filter):
            col = (1.0 - gamma) * col + gamma * ((adj @ col) / denom)
            col -= (ones_trivial @ col) * ones_trivial
            nrm = np.linalg.norm(col)
            if not np.isfinite(nrm) or nrm == 0.0:
                raise NumericalError("filtering produced a degenerate column")
            col /= nrm
        filtered[:, j] = col

    if embedding.normalized:
        out = filtered * np.sqrt(deg)[:, None]
        lap = G.normalized_laplacian()
        trivial = _trivial_vector(G, normalized=True)
    else:
        out = filtered
        lap = G.laplacian()
        trivial = ones_trivial
    out -= np.outer(trivial, trivial @ out)
    norms = np.linalg.norm(out, axis=0)
    if np.any(norms == 0.0):
        raise NumericalError("filtering produced a zero column")
    out /= norms
    residuals = np.linalg.norm(lap @ out - out * zetas[None, :], axis=0)
    return SpectralEmbedding(
        eigenvalues=zetas.copy(),
        vectors=out,
        normalized=embedding.normalized,
        source=embedding.source,
        residuals=residuals,
    )
