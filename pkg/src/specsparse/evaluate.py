"""Clustering accuracy via optimal cluster-to-class assignment, plus run averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError, ParameterError


@dataclass
class AccuracyReport:
    """ACC plus the maximizing cluster-to-class mapping and the count matrix.

    ``confusion[c, j]`` counts points with truth class c and predicted cluster
    j; ``mapping`` assigns cluster ids to truth classes (injective, partial
    when cluster and class counts differ); ``acc`` = matched count / n.
    """

    acc: float
    mapping: dict
    confusion: np.ndarray
    n: int


def clustering_accuracy(predicted, truth) -> AccuracyReport:
    """Fraction of points whose cluster, under the best cluster-to-class
    assignment (Hungarian on the padded square count matrix), matches truth."""
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise DimensionError("predicted and truth labels must be equal-length vectors")
    n = predicted.size
    if n < 1:
        raise ParameterError("need at least one instance")
    n_classes = int(truth.max()) + 1
    n_clusters = int(predicted.max()) + 1
    confusion = np.zeros((n_classes, n_clusters), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)

    side = max(n_classes, n_clusters)
    padded = np.zeros((side, side), dtype=np.int64)
    padded[:n_classes, :n_clusters] = confusion
    rows, cols = linear_sum_assignment(padded, maximize=True)
    matched = int(padded[rows, cols].sum())
    mapping = {
        int(c): int(r)
        for r, c in zip(rows, cols)
        if r < n_classes and c < n_clusters and confusion[r, c] > 0
    }
    return AccuracyReport(acc=matched / n, mapping=mapping, confusion=confusion, n=n)


def averaged_run(config, runs: int) -> dict:
    """Run the configured pipeline with seeds master+0 .. master+runs-1 and
    aggregate mean/std ACC plus mean stage timings."""
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    from .pipeline import run_pipeline  # local import: pipeline imports this module

    accs = []
    timing_sums: dict[str, float] = {}
    base_seed = config.seed
    for i in range(runs):
        cfg = config.replace(seed=base_seed + i)
        try:
            result = run_pipeline(cfg, write_artifacts=False)
        except Exception as exc:
            raise RuntimeError(f"run with seed {base_seed + i} failed: {exc}") from exc
        if result.acc is None:
            raise ParameterError("averaged_run needs ground-truth labels for ACC")
        accs.append(result.acc)
        for key, value in result.timings.items():
            timing_sums[key] = timing_sums.get(key, 0.0) + value
    accs = np.array(accs)
    return {
        "dataset": config.input_path,
        "method": "full",
        "params": config.to_dict(),
        "runs": runs,
        "acc_mean": float(accs.mean()),
        "acc_std": float(accs.std()),
        "timings": {k: v / runs for k, v in timing_sums.items()},
    }
