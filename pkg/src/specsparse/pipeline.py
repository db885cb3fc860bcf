"""End-to-end pipeline: kNN graph, two-phase sparsification, eigensolve,
filtering, k-means, accuracy, and artifact emission.

Stage order follows the sparsify-scale-eigensolve-filter-kmeans flow; a
MANIFEST file in the output directory records each completed stage so partial
results of a failed run remain interpretable.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio
from .cluster import spectral_cluster
from .errors import ParameterError, ParseError
from .evaluate import clustering_accuracy
from .graph import WeightedGraph, build_knn_graph
from .scale import SgdParams, sgd_scale
from .sparsify import Sparsifier, recover_off_tree_edges
from .tree import build_spanning_tree

STAGES = ("load", "graph", "sparsify", "scale", "eigensolve", "filter", "kmeans", "report")

VARIANTS = ("full", "original", "tree-only", "no-scaling", "no-filter")

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass
class PipelineConfig:
    """Every knob of the pipeline; round-trips through a flat key=value file."""

    input_path: str = ""
    input_format: str = "csv"          # csv | libsvm | graph
    label_column: int | None = None    # csv only
    labels_path: str | None = None     # external truth labels (graph inputs)
    standardize: bool = False
    knn_k: int = 10
    kernel: str = "self-tuning"        # self-tuning | gaussian | reciprocal
    kernel_sigma: float | None = None
    self_tuning_rank: int = 7
    tree_method: str = "max-weight"    # max-weight | akpw-lsst
    budget: float = 0.15
    batch_fraction: float = 0.01
    stability_tol: float = 0.01
    power_t: int = 2
    delta_bar_lambda_n: float = 0.5
    beta: float = 0.5
    eta_max: float = 0.2
    epsilon: float = 0.01
    n_max: int = 100
    gamma: float = 0.7
    n_filter: int = 10
    clusters: int = 2
    restarts: int = 10
    kmeans_max_iter: int = 300
    normalized: bool = True
    row_normalize: bool = True
    filter: bool = True
    seed: int = 0
    outdir: str = "out"
    figures: bool = True
    rank_once: bool = False
    stability_eig_tol: float = 1e-6
    eig_tol: float = 1e-8
    eig_max_iter: int = 1000
    oracle_cap: int = 600

    def replace(self, **kw) -> "PipelineConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if value is None else value}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"config line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in fields:
                raise ParseError(f"config line {lineno}: unknown key {key!r}")
            kw[key] = _coerce(fields[key], value, lineno)
        return cls(**kw)

    def sgd_params(self) -> SgdParams:
        return SgdParams(
            delta_bar_lambda_n=self.delta_bar_lambda_n,
            beta=self.beta,
            eta_max=self.eta_max,
            epsilon=self.epsilon,
            n_max=self.n_max,
            t=self.power_t,
        )


def _coerce(f: dataclasses.Field, value: str, lineno: int):
    kinds = {
        "input_path": str, "input_format": str, "labels_path": str,
        "kernel": str, "tree_method": str, "outdir": str,
    }
    if value == "":
        return None if f.name in ("label_column", "labels_path", "kernel_sigma") else ""
    if f.name in kinds:
        return value
    if f.name in ("label_column",):
        return int(value)
    if f.name in ("kernel_sigma",):
        return float(value)
    lowered = value.lower()
    if lowered in _BOOL_TRUE:
        return True
    if lowered in _BOOL_FALSE:
        return False
    try:
        if any(ch in value for ch in ".eE") or "inf" in lowered or "nan" in lowered:
            return float(value)
        return int(value)
    except ValueError:
        raise ParseError(f"config line {lineno}: cannot parse value {value!r}")


@dataclass
class PipelineResult:
    labels: np.ndarray
    acc: float | None
    timings: dict
    budget_b: float
    variant: str
    embedding: object = None
    sparsifier: Sparsifier | None = None
    scaling_state: object = None
    graph: WeightedGraph | None = None
    subgraph: WeightedGraph | None = None
    truth: np.ndarray | None = None
    outdir: str | None = None
    stage_reached: str = ""
    metrics: dict = field(default_factory=dict)


class _Manifest:
    def __init__(self, outdir: Path | None):
        self.path = outdir / "MANIFEST" if outdir is not None else None
        if self.path is not None:
            self.path.write_text("")

    def record(self, stage: str, *artifacts: str) -> None:
        if self.path is None:
            return
        with open(self.path, "a") as fh:
            fh.write(stage + ("".join(" " + a for a in artifacts)) + "\n")


def load_input(config: PipelineConfig):
    """Return (graph-or-dataset, truth labels or None) for the configured input."""
    fmt = config.input_format
    if fmt == "csv":
        ds = dataio.load_dense_csv(config.input_path, label_column=config.label_column)
    elif fmt == "libsvm":
        ds = dataio.load_libsvm(config.input_path)
    elif fmt == "graph":
        graph = dataio.load_graph(config.input_path)
        truth = (
            dataio.load_labels(config.labels_path)
            if config.labels_path
            else None
        )
        return graph, truth
    else:
        raise ParameterError(f"unknown input format {fmt!r}")
    if config.standardize:
        ds = dataio.standardize(ds)
    truth = ds.labels
    if config.labels_path:
        truth = dataio.load_labels(config.labels_path)
    return ds, truth


def run_pipeline(
    config: PipelineConfig,
    variant: str = "full",
    write_artifacts: bool = True,
    outdir: str | None = None,
) -> PipelineResult:
    """Execute the pipeline (or an ablation variant) and optionally write artifacts.

    variants: "full" (recover + scale + filter), "original" (spectral
    clustering directly on the input graph), "tree-only" (budget forced to 0),
    "no-scaling" (skip the SGD phase), "no-filter" (skip the Jacobi filter).
    """
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}")
    out = Path(outdir or config.outdir) if write_artifacts else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out)
    timings: dict[str, float] = {}
    stage = "load"
    try:
        t0 = time.perf_counter()
        loaded, truth = load_input(config)
        manifest.record("load", config.input_path)

        stage = "graph"
        if isinstance(loaded, WeightedGraph):
            graph = loaded
        else:
            graph = build_knn_graph(
                loaded,
                config.knn_k,
                kernel=config.kernel,
                sigma=config.kernel_sigma,
                self_tuning_rank=config.self_tuning_rank,
            )
        timings["graph"] = time.perf_counter() - t0
        if out is not None:
            dataio.save_graph(graph, out / "original.graph")
        manifest.record("graph", "original.graph")

        sparsifier = None
        scaling_state = None
        if variant == "original":
            timings["sparsify"] = 0.0
            timings["scale"] = 0.0
            subgraph = graph
            filter_graph = None
            manifest.record("sparsify", "skipped(original)")
            manifest.record("scale", "skipped(original)")
        else:
            stage = "sparsify"
            t0 = time.perf_counter()
            tree = build_spanning_tree(graph, method=config.tree_method)
            budget = 0.0 if variant == "tree-only" else config.budget
            sparsifier = recover_off_tree_edges(
                graph,
                tree,
                budget,
                k_eigs=config.clusters,
                batch_fraction=config.batch_fraction,
                stability_tol=config.stability_tol,
                seed=config.seed,
                t=config.power_t,
                re_embed=not config.rank_once,
                eig_tol=config.stability_eig_tol,
            )
            subgraph = sparsifier.subgraph
            timings["sparsify"] = time.perf_counter() - t0
            if out is not None:
                dataio.save_graph(tree.as_graph(), out / "tree.graph")
                dataio.save_graph(subgraph, out / "sparsified.graph")
                dataio.save_json(sparsifier.sidecar_dict(), out / "stability.json")
                _write_ratio_csv(sparsifier, out / "ratio_var_vs_budget.csv")
            manifest.record(
                "sparsify", "tree.graph", "sparsified.graph", "stability.json",
                "ratio_var_vs_budget.csv",
            )

            stage = "scale"
            t0 = time.perf_counter()
            if variant == "no-scaling":
                timings["scale"] = 0.0
                manifest.record("scale", "skipped(no-scaling)")
            else:
                subgraph, scaling_state = sgd_scale(
                    graph, subgraph, config.sgd_params(), seed=config.seed
                )
                timings["scale"] = time.perf_counter() - t0
                if out is not None:
                    dataio.save_graph(subgraph, out / "scaled.graph")
                    dataio.save_json(
                        scaling_state.history_dict(config.sgd_params(), config.seed),
                        out / "scaling.json",
                    )
                manifest.record("scale", "scaled.graph", "scaling.json")
            filter_graph = (
                graph if (config.filter and variant != "no-filter") else None
            )

        stage = "eigensolve"
        labels, embedding, cluster_timings = spectral_cluster(
            subgraph,
            config.clusters,
            normalized=config.normalized,
            row_normalize=config.row_normalize,
            filter_against=filter_graph,
            gamma=config.gamma,
            n_filter=config.n_filter,
            eig_tol=config.eig_tol,
            eig_max_iter=config.eig_max_iter,
            restarts=config.restarts,
            kmeans_max_iter=config.kmeans_max_iter,
            seed=config.seed,
            source="subgraph" if variant != "original" else "original",
        )
        timings["eigensolve"] = cluster_timings["eigensolve_seconds"]
        timings["filter"] = cluster_timings["filter_seconds"]
        timings["kmeans"] = cluster_timings["kmeans_seconds"]
        if out is not None:
            dataio.save_embedding(
                embedding, out / "embedding.csv", out / "embedding.json"
            )
        manifest.record("eigensolve", "embedding.csv", "embedding.json")
        manifest.record(
            "filter", "applied" if filter_graph is not None else "skipped"
        )
        stage = "kmeans"
        if out is not None:
            dataio.save_labels(labels, out / "labels.csv")
        manifest.record("kmeans", "labels.csv")

        stage = "report"
        acc = None
        if truth is not None:
            acc = clustering_accuracy(labels, truth).acc
        budget_b = (subgraph.m - graph.n + 1) / graph.n
        metrics = {
            "dataset": config.input_path,
            "method": variant,
            "params": config.to_dict(),
            "runs": 1,
            "acc_mean": None if acc is None else round(100.0 * acc, 2),
            "acc_std": 0.0,
            "timings": {k: round(v, 3) for k, v in timings.items()},
            "n": graph.n,
            "m_original": graph.m,
            "m_subgraph": subgraph.m,
            "budget_b": budget_b,
            "seed": config.seed,
        }
        if out is not None:
            dataio.save_json(metrics, out / "metrics.json")
            _write_acc_csv(
                [(budget_b, acc)], out / "acc_vs_budget.csv"
            )
            if config.figures:
                from . import plots

                plots.render_pipeline_figures(out)
        manifest.record("report", "metrics.json", "acc_vs_budget.csv")

        return PipelineResult(
            labels=labels,
            acc=acc,
            timings=timings,
            budget_b=budget_b,
            variant=variant,
            embedding=embedding,
            sparsifier=sparsifier,
            scaling_state=scaling_state,
            graph=graph,
            subgraph=subgraph,
            truth=truth,
            outdir=None if out is None else str(out),
            stage_reached="report",
            metrics=metrics,
        )
    except Exception as exc:
        raise PipelineStageError(stage, exc) from exc


class PipelineStageError(RuntimeError):
    """Carries the pipeline stage whose execution failed."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _write_ratio_csv(sparsifier: Sparsifier, path) -> None:
    with open(path, "w") as fh:
        fh.write("budget,ratio_var\n")
        for rnd in sparsifier.stability_history:
            ratio = "" if rnd.ratio_var is None else f"{rnd.ratio_var:.15g}"
            fh.write(f"{rnd.budget:.15g},{ratio}\n")


def _write_acc_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("budget,acc\n")
        for budget, acc in rows:
            acc_text = "" if acc is None else f"{100.0 * acc:.15g}"
            fh.write(f"{budget:.15g},{acc_text}\n")


def run_budget_sweep(config: PipelineConfig, budgets, variant: str = "full") -> list:
    """Run the pipeline at several off-tree budgets; returns (budget, acc) rows.

    Budgets are evaluated independently with the same master seed so rows are
    comparable; used to produce the ACC-versus-budget report.
    """
    rows = []
    for b in budgets:
        result = run_pipeline(
            config.replace(budget=float(b)), variant=variant, write_artifacts=False
        )
        rows.append((result.budget_b, result.acc))
    return rows


def run_compare(config: PipelineConfig, against: str, outdir: str | None = None) -> dict:
    """Paired run of the full pipeline and one ablation with shared seeds."""
    if against not in ("original", "tree-only", "no-scaling", "no-filter"):
        raise ParameterError(f"unknown ablation {against!r}")
    full = run_pipeline(config, variant="full", write_artifacts=False)
    abl = run_pipeline(config, variant=against, write_artifacts=False)
    comparison = {
        "dataset": config.input_path,
        "against": against,
        "seed": config.seed,
        "full": {
            "acc": None if full.acc is None else round(100.0 * full.acc, 2),
            "budget_b": full.budget_b,
            "timings": {k: round(v, 3) for k, v in full.timings.items()},
        },
        "ablation": {
            "acc": None if abl.acc is None else round(100.0 * abl.acc, 2),
            "budget_b": abl.budget_b,
            "timings": {k: round(v, 3) for k, v in abl.timings.items()},
        },
    }
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        dataio.save_json(comparison, out / "compare.json")
        if config.figures:
            from . import plots

            plots.render_compare_figure(comparison, out / "compare.png")
    return comparison
