"""Command-line driver: pipeline, compare, metrics, knn-graph, sparsify, scale,
cluster and eval subcommands over the shared file formats."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .cluster import spectral_cluster
from .errors import DimensionError, ParameterError
from .evaluate import averaged_run, clustering_accuracy
from .graph import build_knn_graph
from .pipeline import (
    PipelineConfig,
    PipelineStageError,
    run_budget_sweep,
    run_compare,
    run_pipeline,
    _write_acc_csv,
)
from .scale import sgd_scale
from .sparsify import condition_metrics, recover_off_tree_edges
from .tree import build_spanning_tree, total_stretch


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--input", dest="input_path", help="dataset or graph file")
    p.add_argument("--format", dest="input_format", choices=["csv", "libsvm", "graph"])
    p.add_argument("--label-column", dest="label_column", type=int)
    p.add_argument("--labels", dest="labels_path", help="truth labels CSV")
    p.add_argument("--standardize", dest="standardize", action="store_true", default=None)
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--kernel", choices=["self-tuning", "gaussian", "reciprocal"])
    p.add_argument("--kernel-sigma", dest="kernel_sigma", type=float)
    p.add_argument("--self-tuning-rank", dest="self_tuning_rank", type=int)
    p.add_argument("--tree-method", dest="tree_method", choices=["max-weight", "akpw-lsst"])
    p.add_argument("--budget", type=float, help="off-tree edge budget b")
    p.add_argument("--batch-fraction", dest="batch_fraction", type=float)
    p.add_argument("--stability-tol", dest="stability_tol", type=float)
    p.add_argument("--power-t", dest="power_t", type=int)
    p.add_argument("--delta-bar-lambda-n", dest="delta_bar_lambda_n", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--eta-max", dest="eta_max", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n-filter", dest="n_filter", type=int)
    p.add_argument("--clusters", type=int, help="number of clusters k")
    p.add_argument("--restarts", type=int)
    p.add_argument("--kmeans-max-iter", dest="kmeans_max_iter", type=int)
    p.add_argument("--no-normalized", dest="normalized", action="store_false", default=None)
    p.add_argument("--no-row-normalize", dest="row_normalize", action="store_false", default=None)
    p.add_argument("--no-filter", dest="filter", action="store_false", default=None)
    p.add_argument("--rank-once", dest="rank_once", action="store_true", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--outdir")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)


def _config_from_args(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    names = {f.name for f in dataclasses.fields(PipelineConfig)}
    overrides = {
        name: getattr(args, name)
        for name in names
        if hasattr(args, name) and getattr(args, name) is not None
    }
    config = config.replace(**overrides)
    if not config.input_path:
        raise ParameterError("an input file is required (--input or config)")
    return config


def cmd_pipeline(args) -> int:
    config = _config_from_args(args)
    result = run_pipeline(config)
    out = Path(result.outdir)
    if args.sweep_budgets:
        budgets = [float(b) for b in args.sweep_budgets.split(",")]
        rows = run_budget_sweep(config, budgets)
        _write_acc_csv(rows, out / "acc_vs_budget.csv")
        if config.figures:
            from . import plots

            plots.render_pipeline_figures(out)
    acc_text = "n/a" if result.acc is None else f"{100 * result.acc:.2f}"
    print(f"pipeline done: acc={acc_text} budget_b={result.budget_b:.4f} -> {out}")
    if args.runs > 1:
        aggregate = averaged_run(config, args.runs)
        dataio.save_json(aggregate, out / "aggregate.json")
        print(
            f"averaged over {args.runs} runs: acc_mean={aggregate['acc_mean'] * 100:.2f} "
            f"acc_std={aggregate['acc_std'] * 100:.2f}"
        )
    return 0


def cmd_compare(args) -> int:
    config = _config_from_args(args)
    comparison = run_compare(config, args.against, outdir=config.outdir)
    full_acc = comparison["full"]["acc"]
    abl_acc = comparison["ablation"]["acc"]
    print(f"full: acc={full_acc}  {args.against}: acc={abl_acc}")
    return 0


def cmd_metrics(args) -> int:
    ga = dataio.load_graph(args.graph_a)
    gb = dataio.load_graph(args.graph_b)
    if ga.n != gb.n:
        raise DimensionError(f"vertex counts differ: {ga.n} vs {gb.n}")
    pm = condition_metrics(ga, gb, oracle_cap=args.oracle_cap)
    stretch = None
    if gb.m == gb.n - 1:
        stretch = total_stretch(ga, build_spanning_tree(gb))
    elif gb.n <= args.oracle_cap:
        stretch = _dense_trace(ga, gb)
    payload = {
        "lambda1": pm.lambda1,
        "lambdan": pm.lambdan,
        "kappa": pm.kappa,
        "approximate": pm.approximate,
        "total_stretch": stretch,
        "edge_counts": {"graph_a": ga.m, "graph_b": gb.m},
        "budget_b": (gb.m - gb.n + 1) / gb.n,
    }
    if args.out:
        dataio.save_json(payload, args.out)
    print(
        f"kappa={pm.kappa:.6g} lambda1={pm.lambda1:.6g} lambdan={pm.lambdan:.6g}"
        f" budget_b={payload['budget_b']:.6g}"
        + (" (approximate)" if pm.approximate else "")
    )
    return 0


def _dense_trace(ga, gb) -> float:
    lg = ga.laplacian().toarray()
    ls = gb.laplacian().toarray()
    return float(np.trace(np.linalg.pinv(ls) @ lg))


def cmd_knn_graph(args) -> int:
    config = _config_from_args(args)
    if config.input_format == "graph":
        raise ParameterError("knn-graph needs a point dataset, not a graph")
    ds, _ = _load_dataset(config)
    graph = build_knn_graph(
        ds,
        config.knn_k,
        kernel=config.kernel,
        sigma=config.kernel_sigma,
        self_tuning_rank=config.self_tuning_rank,
    )
    dataio.save_graph(graph, args.out)
    print(f"wrote kNN graph n={graph.n} m={graph.m} -> {args.out}")
    return 0


def _load_dataset(config):
    from .pipeline import load_input

    return load_input(config)


def cmd_sparsify(args) -> int:
    config = _config_from_args(args)
    graph = dataio.load_graph(config.input_path)
    tree = build_spanning_tree(graph, method=config.tree_method)
    sparsifier = recover_off_tree_edges(
        graph,
        tree,
        config.budget,
        k_eigs=config.clusters,
        batch_fraction=config.batch_fraction,
        stability_tol=config.stability_tol,
        seed=config.seed,
        t=config.power_t,
        re_embed=not config.rank_once,
        eig_tol=config.stability_eig_tol,
    )
    out = Path(config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_graph(tree.as_graph(), out / "tree.graph")
    dataio.save_graph(sparsifier.subgraph, out / "sparsified.graph")
    dataio.save_json(sparsifier.sidecar_dict(), out / "stability.json")
    print(
        f"sparsified m={graph.m} -> {sparsifier.subgraph.m} "
        f"(budget_b={sparsifier.budget_b:.4f}) -> {out}"
    )
    return 0


def cmd_scale(args) -> int:
    config = _config_from_args(args)
    graph = dataio.load_graph(config.input_path)
    subgraph = dataio.load_graph(args.subgraph)
    scaled, state = sgd_scale(graph, subgraph, config.sgd_params(), seed=config.seed)
    out = Path(config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_graph(scaled, out / "scaled.graph")
    dataio.save_json(
        state.history_dict(config.sgd_params(), config.seed), out / "scaling.json"
    )
    print(
        f"scaled {subgraph.m} edges in {state.k - 1} iterations "
        f"(lambda1 {state.lambda_1_init:.4g} -> {state.lambda_1_k:.4g}) -> {out}"
    )
    return 0


def cmd_cluster(args) -> int:
    config = _config_from_args(args)
    graph = dataio.load_graph(config.input_path)
    filter_graph = dataio.load_graph(args.filter_graph) if args.filter_graph else None
    labels, embedding, timings = spectral_cluster(
        graph,
        config.clusters,
        normalized=config.normalized,
        row_normalize=config.row_normalize,
        filter_against=filter_graph if config.filter else None,
        gamma=config.gamma,
        n_filter=config.n_filter,
        eig_tol=config.eig_tol,
        eig_max_iter=config.eig_max_iter,
        restarts=config.restarts,
        kmeans_max_iter=config.kmeans_max_iter,
        seed=config.seed,
        source=config.input_path,
    )
    out = Path(config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_labels(labels, out / "labels.csv")
    dataio.save_embedding(embedding, out / "embedding.csv", out / "embedding.json")
    print(
        f"clustered n={graph.n} into k={config.clusters} "
        f"(eigensolve {timings['eigensolve_seconds']:.3f}s) -> {out}"
    )
    return 0


def cmd_eval(args) -> int:
    predicted = dataio.load_labels(args.predicted)
    truth = dataio.load_labels(args.truth)
    report = clustering_accuracy(predicted, truth)
    payload = {
        "acc": round(100.0 * report.acc, 2),
        "n": report.n,
        "mapping": {str(k): v for k, v in sorted(report.mapping.items())},
    }
    if args.out:
        dataio.save_json(payload, args.out)
    print(f"acc={payload['acc']:.2f} over n={report.n}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsparse",
        description=(
            "Two-phase spectrum-preserving graph sparsification and the "
            "spectral clustering pipeline built on it."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full pipeline end to end")
    _add_config_flags(p)
    p.add_argument("--runs", type=int, default=1, help="average ACC over this many seeds")
    p.add_argument(
        "--sweep-budgets",
        help="comma-separated budgets to evaluate for the ACC-vs-budget report",
    )
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("compare", help="full pipeline vs an ablation, shared seeds")
    _add_config_flags(p)
    p.add_argument(
        "--against",
        required=True,
        choices=["original", "tree-only", "no-scaling", "no-filter"],
    )
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("metrics", help="sparsifier quality metrics for two graphs")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--oracle-cap", dest="oracle_cap", type=int, default=600)
    p.add_argument("--out", help="write metrics JSON here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("knn-graph", help="build a kNN graph from a dataset")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_knn_graph)

    p = sub.add_parser("sparsify", help="phase 1: tree + off-tree edge recovery")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("scale", help="phase 2: SGD edge-weight scaling")
    _add_config_flags(p)
    p.add_argument("--subgraph", required=True, help="graph file to scale")
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("cluster", help="spectral clustering of a graph file")
    _add_config_flags(p)
    p.add_argument("--filter-graph", help="original graph for eigenvector filtering")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="clustering accuracy of predicted vs truth labels")
    p.add_argument("predicted")
    p.add_argument("truth")
    p.add_argument("--out", help="write accuracy JSON here")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParameterError, DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
