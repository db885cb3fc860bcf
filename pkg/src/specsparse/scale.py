"""Phase 2: constrained SGD scaling of subgraph edge weights.

Scaling up subgraph weights lowers the dominant eigenvalue of the pencil
L_G u = lambda L_S u (the worst cut mismatch), but also drags the smallest
eigenvalue down with it. The constrained SGD iteration descends along the
per-edge sensitivity

    d lambda_1 / d w_pq = -lambda_1 * (h_t[p] - h_t[q])^2,

with momentum, while a per-vertex degree-ratio guard phi(p) = d_G(p) / d_S(p)
caps each update so the smallest eigenvalue cannot collapse faster than a
per-iteration factor Delta_{lambda_n} = upper_bound^{1/N_max}.

Updates sweep edges in ascending (u, v) order and mutate the subgraph degree
vector immediately (the guard for a later edge sees earlier updates), so a
run is sequential and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError, ParameterError, ScalingError
from .graph import WeightedGraph
from .sparsify import (
    _pencil_rayleigh,
    _power_vector,
    estimate_extreme_pencil_eigenvalues,
)


@dataclass
class SgdParams:
    """Tuning constants for the scaling loop (defaults follow the reference setup)."""

    delta_bar_lambda_n: float = 0.5
    beta: float = 0.5
    eta_max: float = 0.2
    epsilon: float = 0.01
    n_max: int = 100
    t: int = 2
    estimator_iters: int = 20

    def validate(self):
        if not (0.0 < self.delta_bar_lambda_n <= 1.0):
            raise ParameterError("delta_bar_lambda_n must lie in (0, 1]")
        if not (0.0 <= self.beta < 1.0):
            raise ParameterError("beta must lie in [0, 1)")
        if self.eta_max <= 0 or self.epsilon <= 0:
            raise ParameterError("eta_max and epsilon must be positive")
        if self.n_max < 1 or self.t < 1:
            raise ParameterError("n_max and t must be >= 1")

    def as_dict(self) -> dict:
        return {
            "delta_bar_lambda_n": self.delta_bar_lambda_n,
            "beta": self.beta,
            "eta_max": self.eta_max,
            "epsilon": self.epsilon,
            "n_max": self.n_max,
            "t": self.t,
            "estimator_iters": self.estimator_iters,
        }


@dataclass
class IterationRecord:
    k: int
    lambda1: float
    lambdan: float
    max_abs_dw: float
    eta: float


@dataclass
class ScalingState:
    """Final state of the SGD sweep (weights aligned with subgraph edge order)."""

    w: np.ndarray
    delta_w: np.ndarray
    d_S: np.ndarray
    d_G: np.ndarray
    lambda_1_k: float
    lambda_n_k: float
    eta_k: float
    k: int
    lambda_1_init: float
    lambda_n_init: float
    history: list = field(default_factory=list)

    def history_dict(self, params: SgdParams, seed: int) -> dict:
        return {
            "iterations": [
                {
                    "k": rec.k,
                    "lambda1": rec.lambda1,
                    "lambdan": rec.lambdan,
                    "max_abs_dw": rec.max_abs_dw,
                    "eta": rec.eta,
                }
                for rec in self.history
            ],
            "params": params.as_dict(),
            "seed": seed,
        }


def initial_scale(S: WeightedGraph, lambda_1_0: float, lambda_n_0: float) -> WeightedGraph:
    """Uniform pre-scaling: every weight times sqrt(lambda_1/lambda_n) / 10.

    Uniform scaling by c divides every pencil eigenvalue by c, leaving the
    condition number unchanged; the factor centers the extreme eigenvalues'
    geometric mean before the SGD sweeps refine individual weights.
    """
    if not (lambda_1_0 >= lambda_n_0 > 0.0):
        raise ParameterError(
            f"need lambda_1 >= lambda_n > 0, got {lambda_1_0}, {lambda_n_0}"
        )
    factor = np.sqrt(lambda_1_0 / lambda_n_0) / 10.0
    return S.with_weights(S.edges_w * factor)


def clamped_weight_update(
    delta_w: float,
    d_G_p: float,
    d_G_q: float,
    d_S_p: float,
    d_S_q: float,
    lambda_n_k: float,
    delta_lambda_n: float,
) -> tuple[float, bool]:
    """One edge's guarded update: cap delta_w when the degree-ratio surrogate
    phi = d_G / (d_S + delta_w) would fall to the bar
    lambda_n_k * delta_lambda_n or below at either endpoint.

    The cap places the post-update degree exactly at d_G / bar, i.e. phi lands
    on the bar instead of overshooting below it; overshooting (capping at
    d_G / delta_lambda_n alone) lets the smallest pencil eigenvalue collapse
    arbitrarily fast whenever lambda_n_k is far from 1. Since the bar trails
    the current lambda_n estimate, the cap is never below the current degree,
    so clamped updates stay non-negative and weights stay positive.

    Returns (possibly clamped update, clamped?).
    """
    bar = lambda_n_k * delta_lambda_n
    phi_p = d_G_p / (d_S_p + delta_w)
    phi_q = d_G_q / (d_S_q + delta_w)
    if min(phi_p, phi_q) <= bar:
        dw_p = d_G_p / bar - d_S_p
        dw_q = d_G_q / bar - d_S_q
        return min(dw_p, dw_q), True
    return delta_w, False


def sgd_scale(
    G: WeightedGraph,
    S: WeightedGraph,
    params: SgdParams | None = None,
    seed: int = 0,
    lambda_1_0: float | None = None,
    lambda_n_0: float | None = None,
) -> tuple[WeightedGraph, ScalingState]:
    """Scale subgraph edge weights by constrained SGD with momentum.

    Estimates the extreme pencil eigenvalues of (G, S) unless provided,
    applies the uniform initial scaling, then iterates: fresh approximate
    dominant eigenvector h_t (seeded from ``seed + k``), per-edge sensitivity
    and momentum update, degree-ratio clamp, immediate weight/degree update,
    step-size decay eta = (lambda_1^(k) / lambda_1^(init)) * eta_max, and
    extreme-eigenvalue refresh. Stops when the relative change of the
    lambda_1 estimate drops below epsilon or after n_max iterations.

    The eigenvalue estimates entering the loop describe the pencil after
    initial scaling (uniform scaling shifts both extremes by the reciprocal
    factor, so the unscaled estimates are rescaled analytically).
    """
    params = params or SgdParams()
    params.validate()
    if G.n != S.n:
        raise ParameterError("graph and subgraph must share the vertex set")

    if lambda_1_0 is None or lambda_n_0 is None:
        est1, estn = estimate_extreme_pencil_eigenvalues(
            G, S, iters=params.estimator_iters, seed=seed
        )
        # near-identity pencils can order the two estimates backwards within
        # rounding; restore the ordering instead of failing
        lambda_1_0 = max(est1, estn) if lambda_1_0 is None else lambda_1_0
        lambda_n_0 = min(est1, estn) if lambda_n_0 is None else lambda_n_0

    scaled = initial_scale(S, lambda_1_0, lambda_n_0)
    factor = np.sqrt(lambda_1_0 / lambda_n_0) / 10.0
    lambda_1_init = lambda_1_0 / factor
    lambda_n_init = lambda_n_0 / factor

    n = G.n
    us = scaled.edges_u
    vs = scaled.edges_v
    w = scaled.edges_w.copy()
    delta_w = np.zeros_like(w)
    d_G = G.degree_vector.copy()
    d_S = np.zeros(n, dtype=np.float64)
    np.add.at(d_S, us, w)
    np.add.at(d_S, vs, w)

    delta_lambda_n = params.delta_bar_lambda_n ** (1.0 / params.n_max)
    lambda_1_k = lambda_1_init
    lambda_n_k = lambda_n_init
    delta_lambda_1 = lambda_1_init
    eta = params.eta_max
    history: list[IterationRecord] = []

    k = 1
    while abs(delta_lambda_1) / lambda_1_k >= params.epsilon and k <= params.n_max:
        lap_s = _assemble_laplacian(n, us, vs, w)
        z = 1e-8 * (lap_s.diagonal().sum() / n)
        lu_s = spla.splu((lap_s + z * sp.identity(n, format="csr")).tocsc())
        rng = np.random.default_rng(seed + k)
        h = _power_vector(G.laplacian_apply, lu_s, n, params.t, rng)

        diff = h[us] - h[vs]
        sens = -lambda_1_k * diff * diff
        max_abs_dw = 0.0
        for i in range(w.size):
            dw = params.beta * delta_w[i] - eta * sens[i]
            p, q = us[i], vs[i]
            dw, _ = clamped_weight_update(
                dw, d_G[p], d_G[q], d_S[p], d_S[q], lambda_n_k, delta_lambda_n
            )
            new_w = w[i] + dw
            if not (new_w > 0.0) or not np.isfinite(new_w):
                raise ScalingError(
                    f"iteration {k}: weight of edge ({p},{q}) driven to {new_w}"
                )
            delta_w[i] = dw
            w[i] = new_w
            d_S[p] += dw
            d_S[q] += dw
            max_abs_dw = max(max_abs_dw, abs(dw))

        eta = (lambda_1_k / lambda_1_init) * params.eta_max
        k += 1
        s_current = WeightedGraph(n, us, vs, w, validate=False)
        new_l1, new_ln = estimate_extreme_pencil_eigenvalues(
            G, s_current, iters=params.estimator_iters, seed=seed + 100_000 + k
        )
        if not (np.isfinite(new_l1) and np.isfinite(new_ln)):
            raise NumericalError(
                f"iteration {k}: non-finite eigenvalue estimates "
                f"(lambda1={new_l1}, lambdan={new_ln}); history={history}"
            )
        delta_lambda_1 = new_l1 - lambda_1_k
        lambda_1_k, lambda_n_k = new_l1, new_ln
        history.append(IterationRecord(k - 1, new_l1, new_ln, max_abs_dw, eta))

    final = WeightedGraph(n, us, vs, w)
    state = ScalingState(
        w=w,
        delta_w=delta_w,
        d_S=d_S,
        d_G=d_G,
        lambda_1_k=lambda_1_k,
        lambda_n_k=lambda_n_k,
        eta_k=eta,
        k=k,
        lambda_1_init=lambda_1_init,
        lambda_n_init=lambda_n_init,
        history=history,
    )
    return final, state


def _assemble_laplacian(n, us, vs, w) -> sp.csr_matrix:
    deg = np.zeros(n, dtype=np.float64)
    np.add.at(deg, us, w)
    np.add.at(deg, vs, w)
    data = np.concatenate([w, w])
    rows = np.concatenate([us, vs])
    cols = np.concatenate([vs, us])
    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    return sp.diags(deg, format="csr") - adj
