"""Matplotlib figures written next to reports and training logs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation.report import METRICS, EvalReport  # noqa: E402

_SAVE = {"metadata": {"Software": None}, "dpi": 100}


def plot_report(report: EvalReport, path) -> None:
    """Grouped bars of every metric per category, one panel per K."""
    cats = report.categories()
    fig, axes = plt.subplots(1, len(report.k_values), figsize=(5 * len(report.k_values), 3.6), squeeze=False)
    width = 0.8 / len(METRICS)
    x = np.arange(len(cats))
    for ax, k in zip(axes[0], report.k_values):
        for i, m in enumerate(METRICS):
            ax.bar(x + (i - len(METRICS) / 2 + 0.5) * width, [report.get(c, m, k) for c in cats], width, label=m)
        ax.set_xticks(x)
        ax.set_xticklabels([f"{c}\n(n={report.counts[c]})" for c in cats], fontsize=8)
        ax.set_title(f"K = {k}")
        ax.grid(axis="y", alpha=0.3)
    axes[0][0].set_ylabel("meters (MR: fraction)")
    axes[0][-1].legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_training_curves(history, path) -> None:
    """Per-epoch loss components on a log scale."""
    rows = np.array([b.as_row() for b in history], dtype=np.float64)
    epochs = np.arange(1, len(rows) + 1)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for j, name in enumerate(("anchor_reg", "anchor_cls", "pred_reg", "pred_cls", "total")):
        ax.plot(epochs, np.maximum(rows[:, j], 1e-12), label=name, lw=2 if name == "total" else 1)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


__all__ = ["plot_report", "plot_training_curves"]
