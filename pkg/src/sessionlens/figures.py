"""Figure rendering for the report paths (PNG files next to the data).

Everything draws through the Agg backend so the CLI works headless; each
function writes one file and returns the path it wrote.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 120


def plot_trajectory(analysis, path, threshold: float | None = None):
    """Per-click outcome probability with event labels and impact marks.

    x axis is the click index; distance spikes at or above the threshold
    are flagged on the event that caused them.
    """
    probs = analysis.series.probabilities
    T = len(probs)
    x = np.arange(T)
    fig, ax = plt.subplots(figsize=(max(6.0, T * 0.45), 3.6))
    ax.plot(x, probs, marker="o", markersize=4, lw=1.4, color="#2a6fb0",
            label="outcome probability")
    if threshold is not None and len(analysis.distances.distances):
        spikes = [j + 1 for j, d in enumerate(analysis.distances.distances)
                  if d >= threshold]
        if spikes:
            ax.scatter([x[t] for t in spikes], [probs[t] for t in spikes],
                       s=110, facecolors="none", edgecolors="#c23b22",
                       linewidths=1.8, zorder=3,
                       label=f"impact (|change| >= {threshold:.3g})")
    ax.set_xticks(x)
    ax.set_xticklabels([e.page_type for e in analysis.events],
                       rotation=45, ha="right", fontsize=7)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("click")
    ax.set_ylabel("probability")
    label = f"session {analysis.session_id}"
    if analysis.label is not None:
        label += f" (outcome={analysis.label})"
    ax.set_title(label, fontsize=10)
    ax.grid(alpha=0.25)
    ax.legend(loc="best", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_loss_curve(curve, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.2))
    ax.plot(np.arange(1, len(curve) + 1), curve, marker="o", ms=3, color="#2a6fb0")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.grid(alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_distance_histogram(analyses, threshold, path, bins: int = 40):
    pooled = (np.concatenate([a.distances.distances for a in analyses])
              if analyses else np.zeros(0))
    fig, ax = plt.subplots(figsize=(5.2, 3.2))
    if pooled.size:
        ax.hist(pooled, bins=bins, color="#7ca9cf", edgecolor="white")
    ax.axvline(threshold, color="#c23b22", lw=1.6, ls="--",
               label=f"threshold {threshold:.3g}")
    ax.set_xlabel("prediction change between consecutive clicks")
    ax.set_ylabel("events")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_contrast(report, path, top: int = 15):
    rows = report.rows[:top]
    fig, ax = plt.subplots(figsize=(5.6, max(2.4, 0.4 * len(rows) + 1.2)))
    if rows:
        names = [r.value for r in rows][::-1]
        means = [r.mean_distance for r in rows][::-1]
        counts = [r.count for r in rows][::-1]
        bars = ax.barh(names, means, color="#7ca9cf", edgecolor="white")
        for bar, n in zip(bars, counts):
            ax.text(bar.get_width(), bar.get_y() + bar.get_height() / 2,
                    f" n={n}", va="center", fontsize=7)
    ax.set_xlabel("mean prediction change")
    ax.set_title(f"impact by {report.feature}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
