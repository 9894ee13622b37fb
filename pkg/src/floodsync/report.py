"""Matplotlib figure rendering for run and sweep reports.

Figures are side outputs written next to the delimited metrics file; the
reproducibility guarantee covers the metrics files, not PNG bytes.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import CATEGORIES, MatrixRow, MetricsRow, hop_statistics

_CATEGORY_COLORS = {
    "correct": "#2a9d3f",
    "false_positive": "#e0a42c",
    "failed": "#d84a3a",
    "lost": "#6b6b6b",
}


def _out(base_path: str, suffix: str) -> str:
    root, _ = os.path.splitext(base_path)
    return f"{root}_{suffix}.png"


def render_protocol_figures(
    base_path: str, rows: list[MetricsRow], warmup_periods: int
) -> list[str]:
    """Per-hop error bars and the sync-error time series."""
    written = []
    stats = hop_statistics(rows, warmup_periods)
    if stats:
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        hops = [s.hop for s in stats]
        ax.errorbar(
            hops,
            [s.mean_err_ns for s in stats],
            yerr=[0 if math.isnan(s.std_err_ns) else s.std_err_ns for s in stats],
            fmt="o-",
            capsize=4,
        )
        ax.axhline(0.0, color="k", linewidth=0.6)
        ax.set_xlabel("hop")
        ax.set_ylabel("cumulated delay error (ns)")
        ax.set_title("Delay measurement error by hop")
        ax.set_xticks(hops)
        fig.tight_layout()
        path = _out(base_path, "hops")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for node in sorted({r.node for r in rows}):
        series = [(r.period, r.sync_error_ns) for r in rows if r.node == node]
        ax.plot([p for p, _ in series], [e for _, e in series], label=f"node {node}")
    ax.set_xlabel("period")
    ax.set_ylabel("sync error (ns)")
    ax.set_title("Clock synchronization error")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    path = _out(base_path, "sync")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)
    return written


def render_matrix_figures(base_path: str, rows: list[MatrixRow]) -> list[str]:
    """Stacked classification bars, one panel per (distance, payload)."""
    written = []
    panels = sorted({(r.distance_m, r.payload_bytes) for r in rows})
    fig, axes = plt.subplots(
        len(panels), 1, figsize=(7.0, 2.6 * len(panels)), squeeze=False
    )
    for ax, (dist, payload) in zip(axes[:, 0], panels):
        cells = [r for r in rows if r.distance_m == dist and r.payload_bytes == payload]
        labels = [
            f"{c.skew_ns}ns\n{'off' if c.interferer_db is None else f'{c.interferer_db:g}dB'}"
            for c in cells
        ]
        bottoms = [0.0] * len(cells)
        for cat in CATEGORIES:
            vals = [100.0 * c.fraction(cat) for c in cells]
            ax.bar(labels, vals, bottom=bottoms, label=cat, color=_CATEGORY_COLORS[cat])
            bottoms = [b + v for b, v in zip(bottoms, vals)]
        ax.set_ylabel("% of packets")
        ax.set_title(f"receiver at {dist:g} m, {payload} B payload", fontsize=9)
        ax.tick_params(axis="x", labelsize=6)
    axes[0, 0].legend(fontsize=7, ncol=4)
    fig.tight_layout()
    path = _out(base_path, "classification")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)
    return written


def render_sweep_figure(
    base_path: str, axis: str, points: list[tuple[str, float, float]]
) -> list[str]:
    """Aggregate mean +- std versus the sweep axis."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    xs = range(len(points))
    ax.errorbar(
        xs,
        [mean for _, mean, _ in points],
        yerr=[0 if math.isnan(std) else std for _, _, std in points],
        fmt="o-",
        capsize=4,
    )
    ax.set_xticks(list(xs))
    ax.set_xticklabels([label for label, _, _ in points], fontsize=8)
    ax.axhline(0.0, color="k", linewidth=0.6)
    ax.set_xlabel(axis)
    ax.set_ylabel("estimation error (ns)")
    ax.set_title(f"Sweep over {axis}")
    fig.tight_layout()
    path = _out(base_path, "sweep")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]
