"""Matplotlib renderings of the CLI report outputs.

Every figure mirrors a CSV/JSON artifact written next to it; the delimited
files stay the canonical output and these are convenience views.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METRIC_LABELS = {"mrr": "MRR", "hits1": "H@1", "hits3": "H@3", "hits10": "H@10"}


def probe_figure(probe, path):
    """Distribution of per-timestamp metrics around the reference run."""
    fig, axes = plt.subplots(1, 4, figsize=(14, 3.2), constrained_layout=True)
    for ax, metric in zip(axes, _METRIC_LABELS):
        values = [getattr(r, metric) for r in probe.reports]
        ref = getattr(probe.reference, metric)
        ax.hist(values, bins=min(30, max(5, len(values) // 4)), color="#4878b0")
        ax.axvline(ref, color="red", linestyle="--", linewidth=1.2)
        ax.set_title(f"{_METRIC_LABELS[metric]} (std {probe.stds[metric]:.2e})")
        ax.set_xlabel(_METRIC_LABELS[metric])
    axes[0].set_ylabel("timestamps")
    fig.savefig(path, dpi=150)
    plt.close(fig)


def sweep_figure(rows, path):
    """Metrics as a function of the negative-sample count."""
    ks = [row.negatives for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    for metric, label in _METRIC_LABELS.items():
        ax.plot(ks, [getattr(row.report, metric) for row in rows],
                marker="o", label=label)
    ax.set_xlabel("negative samples")
    ax.set_ylabel("metric")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def curvature_delta_figure(delta, path):
    """Heatmap of |curvature difference| over relations x timestamps."""
    delta = np.atleast_2d(np.asarray(delta))
    fig, ax = plt.subplots(figsize=(7, 5), constrained_layout=True)
    im = ax.imshow(delta, aspect="auto", cmap="viridis", interpolation="nearest")
    ax.set_xlabel("timestamp")
    ax.set_ylabel("relation")
    fig.colorbar(im, ax=ax, label="|Δ curvature|")
    fig.savefig(path, dpi=150)
    plt.close(fig)


def embeddings_2d_figure(points, curvature_value, path):
    """Scatter of exp-mapped entities inside the ball boundary."""
    points = np.asarray(points)
    radius = 1.0 / np.sqrt(curvature_value)
    fig, ax = plt.subplots(figsize=(5.5, 5.5), constrained_layout=True)
    ax.add_patch(plt.Circle((0, 0), radius, fill=False, color="black", linewidth=1))
    ax.scatter(points[:, 0], points[:, 1], s=6, alpha=0.6)
    pad = 1.05 * radius
    ax.set_xlim(-pad, pad)
    ax.set_ylim(-pad, pad)
    ax.set_aspect("equal")
    fig.savefig(path, dpi=150)
    plt.close(fig)


def training_curve_figure(history, path):
    """Loss (and validation MRR when present) across epochs."""
    epochs = [row["epoch"] for row in history]
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    ax.plot(epochs, [row["loss"] for row in history], label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    valid = [(row["epoch"], row["mrr"]) for row in history if "mrr" in row]
    if valid:
        ax2 = ax.twinx()
        ax2.plot(*zip(*valid), color="darkorange", marker="o", label="valid MRR")
        ax2.set_ylabel("valid MRR")
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=150)
    plt.close(fig)
