"""Phase 1: off-tree edge embedding, criticality ranking and stability-driven recovery.

The dominant generalized eigenvector of the pencil L_G u = lambda L_S u
measures the worst cut-size mismatch between the graph and its subgraph.
A few generalized power iterations h_t = (pinv(L_S) L_G)^t h_0 approximate
it cheaply; the criticality of an off-tree edge,

    c_pq = w_pq * (h_t[p] - h_t[q])^2,

is the estimated first-order reduction of the dominant eigenvalue obtained by
recovering that edge into the subgraph. Recovery proceeds in batches, after
each of which the bottom eigenvalues of the (normalized) subgraph Laplacian
are recomputed; the loop stops once their variation ratio between rounds
falls below a tolerance or the off-tree edge budget is exhausted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConnectivityError, NumericalError, ParameterError
from .graph import WeightedGraph
from .tree import SpanningTree
from . import eig as eigmod


@dataclass
class GeneralizedEigenEstimate:
    """Approximate dominant generalized eigenvector plus extreme eigenvalue estimates."""

    h_t: np.ndarray
    t: int
    lambda_1_est: float
    lambda_n_est: float | None = None


@dataclass
class RecoveryRound:
    budget: float
    eigenvalues: np.ndarray
    ratio_var: float | None
    clamped: bool = False


@dataclass
class Sparsifier:
    """Subgraph state produced by off-tree edge recovery."""

    base_graph: WeightedGraph
    subgraph: WeightedGraph
    recovered_edges: list = field(default_factory=list)
    budget_b: float = 0.0
    stability_history: list = field(default_factory=list)
    seed: int = 0
    params: dict = field(default_factory=dict)

    def sidecar_dict(self) -> dict:
        return {
            "rounds": [
                {
                    "budget": round_.budget,
                    "eigenvalues": [float(x) for x in round_.eigenvalues],
                    "ratio_var": round_.ratio_var,
                    "clamped": round_.clamped,
                }
                for round_ in self.stability_history
            ],
            "seed": self.seed,
            "params": self.params,
        }


def _project_out_ones(x: np.ndarray) -> np.ndarray:
    return x - x.mean()


def _power_vector(lg_apply, lu_s, n, t, rng) -> np.ndarray:
    """t rounds of (solve L_S y = L_G x, deflate all-ones, normalize)."""
    h = _project_out_ones(rng.standard_normal(n))
    nrm = np.linalg.norm(h)
    if nrm == 0.0:
        raise NumericalError("degenerate random start vector")
    h /= nrm
    for _ in range(t):
        h = lu_s.solve(lg_apply(h))
        h = _project_out_ones(h)
        nrm = np.linalg.norm(h)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise NumericalError("generalized power iteration broke down")
        h /= nrm
    return h


def _pencil_rayleigh(G_quad, S_quad, h) -> float:
    den = S_quad(h)
    if den <= 0.0:
        raise NumericalError("vanishing subgraph quadratic form in Rayleigh quotient")
    return G_quad(h) / den


def generalized_power_iterate(
    G: WeightedGraph,
    S: WeightedGraph,
    t: int,
    seed: int = 0,
    lambda_n_iters: int = 20,
    estimate_lambda_n: bool = True,
) -> GeneralizedEigenEstimate:
    """Approximate the dominant generalized eigenvector of L_G u = lambda L_S u.

    Starts from a seeded standard-normal vector deflated against all-ones and
    applies t rounds of (solve with L_S, apply L_G). lambda_1 is the Rayleigh
    quotient at h_t; lambda_n comes from the same iteration run on the
    reversed pencil (roles of L_G and L_S swapped).
    """
    if t < 1:
        raise ParameterError(f"power iteration count must be >= 1, got {t}")
    if S.n != G.n:
        raise ParameterError("graph and subgraph must share the vertex set")
    rng = np.random.default_rng(seed)
    lu_s = S.regularized_lu()
    h = _power_vector(G.laplacian_apply, lu_s, G.n, t, rng)
    lambda_1 = _pencil_rayleigh(G.laplacian_quadratic, S.laplacian_quadratic, h)
    lambda_n = None
    if estimate_lambda_n:
        lu_g = G.regularized_lu()
        g = _power_vector(S.laplacian_apply, lu_g, G.n, lambda_n_iters, rng)
        lambda_n = _pencil_rayleigh(G.laplacian_quadratic, S.laplacian_quadratic, g)
    return GeneralizedEigenEstimate(h_t=h, t=t, lambda_1_est=lambda_1, lambda_n_est=lambda_n)


def edge_criticality(estimate: GeneralizedEigenEstimate, p: int, q: int, w: float) -> float:
    """Spectral criticality w * (h_t[p] - h_t[q])^2 of the off-tree edge (p, q)."""
    diff = estimate.h_t[p] - estimate.h_t[q]
    return float(w * diff * diff)


def _criticality_scores(h: np.ndarray, us, vs, ws) -> np.ndarray:
    diff = h[us] - h[vs]
    return ws * diff * diff


def estimate_extreme_pencil_eigenvalues(
    G: WeightedGraph, S: WeightedGraph, iters: int = 20, seed: int = 0
) -> tuple[float, float]:
    """Power-iteration estimates of the extreme eigenvalues of pinv(L_S) L_G."""
    rng = np.random.default_rng(seed)
    lu_s = S.regularized_lu()
    h = _power_vector(G.laplacian_apply, lu_s, G.n, iters, rng)
    lambda_1 = _pencil_rayleigh(G.laplacian_quadratic, S.laplacian_quadratic, h)
    lu_g = G.regularized_lu()
    g = _power_vector(S.laplacian_apply, lu_g, G.n, iters, rng)
    lambda_n = _pencil_rayleigh(G.laplacian_quadratic, S.laplacian_quadratic, g)
    return lambda_1, lambda_n


@dataclass
class PencilMetrics:
    lambda1: float
    lambdan: float
    kappa: float
    approximate: bool


def dense_pencil_eigenvalues(G: WeightedGraph, S: WeightedGraph) -> np.ndarray:
    """All generalized eigenvalues of (L_G, L_S) restricted to the complement
    of the all-ones vector, ascending. Dense; meant for small graphs."""
    n = G.n
    basis = scipy.linalg.null_space(np.ones((1, n)))  # n x (n-1), orthonormal
    lg = G.laplacian().toarray()
    ls = S.laplacian().toarray()
    a = basis.T @ lg @ basis
    b = basis.T @ ls @ basis
    return scipy.linalg.eigh(a, b, eigvals_only=True)


def condition_metrics(
    G: WeightedGraph,
    S: WeightedGraph,
    oracle_cap: int = 600,
    method: str = "auto",
    iters: int = 20,
    seed: int = 0,
) -> PencilMetrics:
    """Extreme pencil eigenvalues and relative condition number kappa.

    Exact dense generalized eigendecomposition below ``oracle_cap`` vertices,
    otherwise power/inverse-iteration estimates flagged as approximate.
    """
    if G.n != S.n:
        raise ParameterError("graphs must share the vertex set")
    if method not in ("auto", "dense", "approximate"):
        raise ParameterError(f"unknown method {method!r}")
    if method == "dense" and G.n > oracle_cap:
        raise ParameterError(
            f"dense path limited to n <= {oracle_cap}; pass method='approximate'"
        )
    use_dense = method == "dense" or (method == "auto" and G.n <= oracle_cap)
    if use_dense:
        vals = dense_pencil_eigenvalues(G, S)
        lambda_n, lambda_1 = float(vals[0]), float(vals[-1])
        approx = False
    else:
        lambda_1, lambda_n = estimate_extreme_pencil_eigenvalues(G, S, iters, seed)
        approx = True
    if lambda_n <= 0.0:
        raise NumericalError("nonpositive smallest pencil eigenvalue (disconnected S?)")
    return PencilMetrics(lambda_1, lambda_n, lambda_1 / lambda_n, approx)


def recover_off_tree_edges(
    G: WeightedGraph,
    tree: SpanningTree,
    budget_b: float,
    k_eigs: int,
    batch_fraction: float = 0.01,
    stability_tol: float = 0.01,
    seed: int = 0,
    t: int = 2,
    re_embed: bool = True,
    stability_normalized: bool = True,
    eig_tol: float = 1e-6,
    eig_max_iter: int = 2000,
) -> Sparsifier:
    """Recover spectrally critical off-tree edges into the tree until the
    bottom-k eigenvalues of the subgraph Laplacian stabilize or the budget
    (number of off-tree edges as a fraction of |V|) is reached.

    Each round embeds the current subgraph with a fresh generalized power
    iteration (unless ``re_embed`` is off, which ranks once against the bare
    tree), ranks the remaining off-tree edges by criticality (ties by
    ascending (u, v)), adds the top ``batch_fraction * |V|`` with their
    original weights, then records the bottom-k eigenvalue vector and its
    variation ratio against the previous round.
    """
    if budget_b < 0:
        raise ParameterError("budget must be non-negative")
    if k_eigs < 2:
        raise ParameterError("k_eigs must be >= 2")
    if batch_fraction <= 0:
        raise ParameterError("batch_fraction must be positive")
    n = G.n
    rng = np.random.default_rng(seed)
    params = {
        "budget_b": budget_b,
        "batch_fraction": batch_fraction,
        "k_eigs": k_eigs,
        "stability_tol": stability_tol,
        "t": t,
        "re_embed": re_embed,
        "stability_normalized": stability_normalized,
    }

    off_idx = tree.off_tree_edge_indices()
    target = int(np.floor(budget_b * n + 1e-9))
    clamped = False
    if target > off_idx.size:
        target = off_idx.size
        clamped = True
    batch = max(1, int(np.floor(batch_fraction * n + 1e-9)))

    chosen = list(tree.edge_indices)
    current = G.subgraph_from_edge_indices(np.array(sorted(chosen), dtype=np.int64))
    history: list[RecoveryRound] = []
    recovered: list[tuple[tuple[int, int], float]] = []

    def bottom_eigs(subgraph, warm):
        emb = eigmod.bottom_eigenpairs(
            subgraph, k_eigs, normalized=stability_normalized,
            tol=eig_tol, max_iter=eig_max_iter,
            seed=int(rng.integers(2**31 - 1)), initial_block=warm,
        )
        return emb.eigenvalues, emb.vectors

    def budget_of(graph):
        return (graph.m - n + 1) / n

    vals, warm_block = bottom_eigs(current, None)
    history.append(RecoveryRound(budget_of(current), vals, None, clamped))

    remaining = off_idx.copy()
    added_total = 0
    base_estimate = None
    while added_total < target:
        if re_embed or base_estimate is None:
            h_seed = int(rng.integers(2**31 - 1))
            estimate = generalized_power_iterate(
                G, current, t, seed=h_seed, estimate_lambda_n=False
            )
            if not re_embed:
                base_estimate = estimate
        else:
            estimate = base_estimate
        scores = _criticality_scores(
            estimate.h_t, G.edges_u[remaining], G.edges_v[remaining], G.edges_w[remaining]
        )
        order = np.lexsort((G.edges_v[remaining], G.edges_u[remaining], -scores))
        take = min(batch, target - added_total, remaining.size)
        picked_pos = order[:take]
        picked = remaining[picked_pos]
        for pos in picked_pos:
            i = remaining[pos]
            recovered.append(
                ((int(G.edges_u[i]), int(G.edges_v[i])), float(scores[pos]))
            )
        mask = np.ones(remaining.size, dtype=bool)
        mask[picked_pos] = False
        remaining = remaining[mask]
        added_total += take

        chosen.extend(int(i) for i in picked)
        current = G.subgraph_from_edge_indices(np.array(sorted(chosen), dtype=np.int64))
        prev = vals
        vals, warm_block = bottom_eigs(current, warm_block)
        ratio = eigmod.eigenvalue_variation_ratio(prev, vals)
        history.append(RecoveryRound(budget_of(current), vals, ratio, clamped))
        if ratio < stability_tol:
            break

    return Sparsifier(
        base_graph=G,
        subgraph=current,
        recovered_edges=recovered,
        budget_b=budget_of(current),
        stability_history=history,
        seed=seed,
        params=params,
    )
