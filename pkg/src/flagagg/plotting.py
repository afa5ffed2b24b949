"""Figure rendering for training reports.

Figures are written to files next to the delimited output; nothing here is
required by the numerical pipeline.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_run_figures(record, out_dir: str, prefix: str = "run") -> list[str]:
    """Render loss and accuracy curves; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    iters = [row[0] for row in record.rows]
    losses = [row[1] for row in record.rows]
    accs = [row[2] for row in record.rows]
    paths = []
    for name, series, ylabel in (("loss", losses, "train loss"),
                                 ("accuracy", accs, "test accuracy")):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(iters, series, lw=1.2)
        ax.set_xlabel("iteration")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{prefix}_{name}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def render_comparison_figure(series_by_agg: dict, out_dir: str, prefix: str = "compare") -> str:
    """Overlay per-aggregator accuracy curves in one figure."""
    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (iters, accs) in series_by_agg.items():
        ax.plot(iters, accs, lw=1.2, label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("test accuracy")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{prefix}_accuracy.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
