import json
from pathlib import Path

import numpy as np
import pytest

from specsparse import PipelineConfig, run_compare, run_pipeline
from specsparse.cli import main as cli_main
from specsparse.dataio import load_graph, save_graph, save_labels
from specsparse.errors import ParseError
from specsparse.pipeline import PipelineStageError, run_budget_sweep

from oracles import gaussian_blobs, ring_of_cliques


def write_blob_csv(path, n_per=20, seed=0):
    """Two well-separated blobs as a labeled CSV dataset."""
    pts, labels = gaussian_blobs(n_per, [[0.0, 0.0], [12.0, 0.0]], 0.8, seed=seed)
    with open(path, "w") as fh:
        for row, lab in zip(pts, labels):
            fh.write(f"{row[0]:.12g},{row[1]:.12g},{lab}\n")
    return pts, labels


def graph_fixture_config(tmp_path, **kw):
    g, truth = ring_of_cliques(4, 10, inter=0.25, seed=2)
    gpath = tmp_path / "ring.graph"
    lpath = tmp_path / "truth.csv"
    save_graph(g, gpath)
    save_labels(truth, lpath)
    defaults = dict(
        input_path=str(gpath),
        input_format="graph",
        labels_path=str(lpath),
        clusters=4,
        budget=0.15,
        batch_fraction=0.05,
        seed=0,
        outdir=str(tmp_path / "out"),
        figures=False,
    )
    defaults.update(kw)
    return PipelineConfig(**defaults)


class TestConfigRoundTrip:
    def test_text_round_trip_lossless(self, tmp_path):
        config = PipelineConfig(
            input_path="x.csv", label_column=3, budget=0.07, clusters=9,
            kernel_sigma=1.25, filter=False, seed=123,
        )
        path = tmp_path / "run.conf"
        config.save(path)
        assert PipelineConfig.load(path) == config

    def test_unknown_key_rejected(self):
        with pytest.raises(ParseError, match="unknown key"):
            PipelineConfig.from_text("no_such_option = 3\n")

    def test_comments_and_blanks(self):
        config = PipelineConfig.from_text("# comment\n\nclusters = 7\n")
        assert config.clusters == 7


class TestPipeline:
    def test_two_bl耀cliques_csv_pipeline(self, tmp_path):
        csv_path = tmp_path / "blobs.csv"
        write_blob_csv(csv_path)
        config = PipelineConfig(
            input_path=str(csv_path), input_format="csv", label_column=2,
            knn_k=5, clusters=2, budget=0.1, outdir=str(tmp_path / "out"),
            figures=False, seed=1,
        )
        result = run_pipeline(config)
        assert result.acc == 1.0
        out = Path(result.outdir)
        for name in (
            "MANIFEST", "original.graph", "tree.graph", "sparsified.graph",
            "stability.json", "scaled.graph", "scaling.json", "embedding.csv",
            "embedding.json", "labels.csv", "metrics.json",
            "ratio_var_vs_budget.csv", "acc_vs_budget.csv",
        ):
            assert (out / name).exists(), name
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["acc_mean"] == 100.0
        assert metrics["runs"] == 1

    def test_budget_zero_runs_on_bare_tree(self, tmp_path):
        config = graph_fixture_config(tmp_path, budget=0.0)
        result = run_pipeline(config)
        assert result.budget_b == 0.0
        assert result.subgraph.m == result.graph.n - 1
        metrics = json.loads((Path(result.outdir) / "metrics.json").read_text())
        assert metrics["budget_b"] == 0.0

    def test_manifest_stage_order(self, tmp_path):
        config = graph_fixture_config(tmp_path)
        result = run_pipeline(config)
        stages = [line.split()[0] for line in
                  (Path(result.outdir) / "MANIFEST").read_text().splitlines()]
        assert stages == [
            "load", "graph", "sparsify", "scale", "eigensolve", "filter",
            "kmeans", "report",
        ]

    def test_failure_carries_stage_name(self, tmp_path):
        config = graph_fixture_config(tmp_path, input_path=str(tmp_path / "missing.graph"))
        with pytest.raises(PipelineStageError) as err:
            run_pipeline(config)
        assert err.value.stage == "load"

    def test_variants_share_interface(self, tmp_path):
        config = graph_fixture_config(tmp_path)
        full = run_pipeline(config, write_artifacts=False)
        原 = run_pipeline(config, variant="original", write_artifacts=False)
        assert full.acc == 1.0 and 原.acc == 1.0
        assert full.timings["scale"] > 0.0
        assert 原.timings["scale"] == 0.0

    def test_budget_sweep_rows(self, tmp_path):
        config = graph_fixture_config(tmp_path)
        rows = run_budget_sweep(config, [0.0, 0.1], variant="full")
        assert len(rows) == 2
        assert rows[0][0] == 0.0
        assert rows[1][0] > 0.0


class TestDeterminism:
    def test_byte_identical_artifacts_across_runs(self, tmp_path):
        config_a = graph_fixture_config(tmp_path, outdir=str(tmp_path / "a"))
        config_b = config_a.replace(outdir=str(tmp_path / "b"))
        ra = run_pipeline(config_a)
        rb = run_pipeline(config_b)
        out_a, out_b = Path(ra.outdir), Path(rb.outdir)
        names = sorted(p.name for p in out_a.iterdir() if p.suffix != ".png")
        assert names == sorted(p.name for p in out_b.iterdir() if p.suffix != ".png")
        for name in names:
            if name == "metrics.json":
                ma = json.loads((out_a / name).read_text())
                mb = json.loads((out_b / name).read_text())
                ma.pop("timings")
                mb.pop("timings")
                ma["params"].pop("outdir")
                mb["params"].pop("outdir")
                assert ma == mb
            else:
                assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


class TestCompare:
    def test_no_scaling_ablation_on_ring(self, tmp_path):
        config = graph_fixture_config(tmp_path, budget=0.02)
        comparison = run_compare(config, against="no-scaling")
        assert comparison["full"]["acc"] >= comparison["ablation"]["acc"]

    def test_original_on_two_cliques(self, tmp_path, two_cliques_weak):
        g, truth = two_cliques_weak
        gpath = tmp_path / "g.graph"
        lpath = tmp_path / "t.csv"
        save_graph(g, gpath)
        save_labels(truth, lpath)
        config = PipelineConfig(
            input_path=str(gpath), input_format="graph", labels_path=str(lpath),
            clusters=2, budget=0.1, seed=0, outdir=str(tmp_path / "out"),
            figures=False,
        )
        comparison = run_compare(config, against="original")
        assert comparison["full"]["acc"] == 100.0
        assert comparison["ablation"]["acc"] == 100.0


class TestCli:
    def test_pipeline_command(self, tmp_path, capsys):
        csv_path = tmp_path / "blobs.csv"
        write_blob_csv(csv_path)
        rc = cli_main([
            "pipeline", "--input", str(csv_path), "--format", "csv",
            "--label-column", "2", "--knn-k", "5", "--clusters", "2",
            "--budget", "0.1", "--outdir", str(tmp_path / "out"),
            "--no-figures", "--seed", "3",
        ])
        assert rc == 0
        assert "acc=100.00" in capsys.readouterr().out

    def test_metrics_command_identical_graphs(self, tmp_path, capsys, c4):
        gpath = tmp_path / "c4.graph"
        save_graph(c4, gpath)
        out = tmp_path / "metrics.json"
        rc = cli_main(["metrics", str(gpath), str(gpath), "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["kappa"] == pytest.approx(1.0, abs=1e-9)
        # m/n - 1 + 1/n consistency: budget of the graph against itself
        assert payload["budget_b"] == pytest.approx((c4.m - c4.n + 1) / c4.n)

    def test_metrics_tree_budget_one_extra_edge(self, tmp_path, c4):
        tree_idx = [c4.edge_index()[(0, 1)], c4.edge_index()[(1, 2)], c4.edge_index()[(2, 3)]]
        tree = c4.subgraph_from_edge_indices(np.array(tree_idx))
        t_path = tmp_path / "tree.graph"
        g_path = tmp_path / "c4.graph"
        out = tmp_path / "m.json"
        save_graph(tree, t_path)
        save_graph(c4, g_path)
        rc = cli_main(["metrics", str(g_path), str(t_path), "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["budget_b"] == 0.0
        rc = cli_main(["metrics", str(g_path), str(g_path), "--out", str(out)])
        payload = json.loads(out.read_text())
        assert payload["budget_b"] == pytest.approx(1.0 / 4.0)  # tree + 1 edge

    def test_stage_commands_compose(self, tmp_path, capsys):
        g, truth = ring_of_cliques(3, 8, inter=0.3, seed=4)
        gpath = tmp_path / "g.graph"
        tpath = tmp_path / "truth.csv"
        save_graph(g, gpath)
        save_labels(truth, tpath)
        work = tmp_path / "work"
        rc = cli_main([
            "sparsify", "--input", str(gpath), "--format", "graph",
            "--clusters", "3", "--budget", "0.2", "--outdir", str(work),
            "--seed", "5",
        ])
        assert rc == 0
        rc = cli_main([
            "scale", "--input", str(gpath), "--format", "graph",
            "--subgraph", str(work / "sparsified.graph"),
            "--outdir", str(work), "--seed", "5",
        ])
        assert rc == 0
        rc = cli_main([
            "cluster", "--input", str(work / "scaled.graph"), "--format", "graph",
            "--filter-graph", str(gpath), "--clusters", "3",
            "--outdir", str(work), "--seed", "5",
        ])
        assert rc == 0
        rc = cli_main([
            "eval", str(work / "labels.csv"), str(tpath),
            "--out", str(work / "acc.json"),
        ])
        assert rc == 0
        payload = json.loads((work / "acc.json").read_text())
        assert payload["acc"] == 100.0

    def test_knn_graph_command(self, tmp_path):
        csv_path = tmp_path / "blobs.csv"
        write_blob_csv(csv_path)
        out = tmp_path / "knn.graph"
        rc = cli_main([
            "knn-graph", "--input", str(csv_path), "--format", "csv",
            "--label-column", "2", "--knn-k", "4", "--out", str(out),
        ])
        assert rc == 0
        g = load_graph(out)
        assert g.n == 40

    def test_compare_command(self, tmp_path, capsys):
        g, truth = ring_of_cliques(3, 8, inter=0.3, seed=6)
        gpath = tmp_path / "g.graph"
        tpath = tmp_path / "t.csv"
        save_graph(g, gpath)
        save_labels(truth, tpath)
        rc = cli_main([
            "compare", "--input", str(gpath), "--format", "graph",
            "--labels", str(tpath), "--clusters", "3", "--budget", "0.1",
            "--against", "no-filter", "--outdir", str(tmp_path / "cmp"),
            "--no-figures", "--seed", "7",
        ])
        assert rc == 0
        assert (tmp_path / "cmp" / "compare.json").exists()

    def test_error_exit_code(self, tmp_path, capsys):
        rc = cli_main([
            "pipeline", "--input", str(tmp_path / "nope.csv"),
            "--clusters", "2", "--outdir", str(tmp_path / "o"),
        ])
        assert rc == 1
        assert "stage load failed" in capsys.readouterr().err

    def test_figures_rendered_by_default(self, tmp_path):
        config = graph_fixture_config(tmp_path, figures=True)
        result = run_pipeline(config)
        out = Path(result.outdir)
        assert (out / "ratio_var_vs_budget.png").exists()
        assert (out / "acc_vs_budget.png").exists()
