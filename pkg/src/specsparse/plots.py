"""Render report figures from the pipeline's plot-data CSVs."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_xy(path):
    xs, ys = [], []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)  # header
        for row in reader:
            if len(row) != 2 or row[1] == "":
                continue
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    return xs, ys


def render_ratio_var_figure(csv_path, png_path) -> None:
    xs, ys = _read_xy(csv_path)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(xs, ys, marker="o", lw=1.2)
    ax.set_xlabel("off-tree edge budget b")
    ax.set_ylabel("variation ratio of bottom eigenvalues")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def render_acc_budget_figure(csv_path, png_path) -> None:
    xs, ys = _read_xy(csv_path)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(xs, ys, marker="s", lw=1.2, color="tab:orange")
    ax.set_xlabel("off-tree edge budget b")
    ax.set_ylabel("ACC (%)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def render_compare_figure(comparison: dict, png_path) -> None:
    labels = ["full", comparison["against"]]
    accs = [
        comparison["full"]["acc"] or 0.0,
        comparison["ablation"]["acc"] or 0.0,
    ]
    fig, ax = plt.subplots(figsize=(4.0, 3.4))
    ax.bar(labels, accs, color=["tab:blue", "tab:gray"], width=0.55)
    ax.set_ylabel("ACC (%)")
    for i, a in enumerate(accs):
        ax.text(i, a, f"{a:.2f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def render_pipeline_figures(outdir) -> None:
    """Render PNGs next to every plot-data CSV present in the output directory."""
    out = Path(outdir)
    ratio = out / "ratio_var_vs_budget.csv"
    if ratio.exists():
        render_ratio_var_figure(ratio, out / "ratio_var_vs_budget.png")
    acc = out / "acc_vs_budget.csv"
    if acc.exists():
        render_acc_budget_figure(acc, out / "acc_vs_budget.png")
