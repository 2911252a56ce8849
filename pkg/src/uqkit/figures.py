"""Matplotlib rendering for the report path (written next to the CSV data)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_parity_figure(path, observed, center, half_width, unit="", title=""):
    """Observed vs predicted scatter with +/- half-width error bars.

    Points are colored by interval size so over/under-confident regions show
    up the way the per-point error coloring does in the source analyses.
    """
    observed = np.asarray(observed)
    center = np.asarray(center)
    half_width = np.asarray(half_width)
    fig, ax = plt.subplots(figsize=(5.0, 4.6))
    ax.errorbar(
        observed, center, yerr=half_width, fmt="none", ecolor="0.8", zorder=1, lw=0.8
    )
    sc = ax.scatter(observed, center, c=half_width, cmap="viridis", s=14, zorder=2)
    lims = [min(observed.min(), center.min()), max(observed.max(), center.max())]
    ax.plot(lims, lims, "k--", lw=0.8)
    label = f"observed [{unit}]" if unit else "observed"
    ax.set_xlabel(label)
    ax.set_ylabel(label.replace("observed", "predicted"))
    if title:
        ax.set_title(title)
    fig.colorbar(sc, ax=ax, label="interval half-width")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_histogram_figure(path, edges, counts, xlabel="residual", title=""):
    edges = np.asarray(edges)
    counts = np.asarray(counts)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", color="#3b6ea5")
    ax.axvline(0.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
