"""Render evaluation results to delimited files and SVG figures.

Tables are the source of truth; every figure is a derived view of a CSV
written alongside it. All plotting goes through matplotlib's Agg backend so
report generation works headless.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "chordkit"

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path) -> None:
    """Save with stable SVG ids and no embedded date, so re-runs are
    byte-identical."""
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)

from .chords import METRIC_KINDS

__all__ = [
    "write_metrics_csv",
    "write_metrics_json",
    "write_confusion_csv",
    "plot_confusion_heatmap",
    "write_recall_csv",
    "plot_recall_bars",
    "plot_training_curves",
    "plot_metric_comparison",
    "read_metrics_csv",
]

METRIC_ROW_ORDER = tuple(f"wcsr_{m}" for m in METRIC_KINDS) + ("acc_frame", "acc_class")


def write_metrics_csv(path: str | Path, scores: dict[str, float]) -> None:
    """One row per metric, in the documented order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name in METRIC_ROW_ORDER:
            writer.writerow([name, repr(float(scores[name]))])


def read_metrics_csv(path: str | Path) -> dict[str, float]:
    scores = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            scores[row["metric"]] = float(row["value"])
    return scores


def write_metrics_json(path: str | Path, scores: dict[str, float],
                       extra: dict | None = None) -> None:
    import json

    payload = {name: float(scores[name]) for name in METRIC_ROW_ORDER}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_confusion_csv(path: str | Path, counts: np.ndarray,
                        qualities: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["reference\\estimate", *qualities])
        for name, row in zip(qualities, counts):
            writer.writerow([name, *[repr(float(v)) for v in row]])


def plot_confusion_heatmap(path: str | Path, counts: np.ndarray,
                           qualities: Sequence[str], title: str = "Quality confusion") -> None:
    """Row-normalized heatmap of the duration-weighted confusion matrix."""
    totals = counts.sum(axis=1, keepdims=True)
    normed = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    n = len(qualities)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.32 * n), max(5.0, 0.3 * n)))
    im = ax.imshow(normed, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(n), qualities, rotation=90, fontsize=7)
    ax.set_yticks(range(n), qualities, fontsize=7)
    ax.set_xlabel("estimated quality")
    ax.set_ylabel("reference quality")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046, label="row fraction")
    fig.tight_layout()
    _save(fig, path)


def write_recall_csv(path: str | Path,
                     rows: Sequence[tuple[str, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quality", "reference_seconds", "recall"])
        for quality, seconds, recall in rows:
            writer.writerow([quality, repr(float(seconds)), repr(float(recall))])


def plot_recall_bars(path: str | Path, rows: Sequence[tuple[str, float, float]],
                     title: str = "Recall per chord quality") -> None:
    """Two-panel view: reference duration (log) above recall per quality."""
    present = [(q, s, r) for q, s, r in rows if s > 0]
    if not present:
        present = [("N", 0.0, 0.0)]
    qualities = [q for q, _, _ in present]
    seconds = np.array([s for _, s, _ in present])
    recalls = np.array([r for _, _, r in present])
    x = np.arange(len(qualities))
    fig, (ax_top, ax_bot) = plt.subplots(
        2, 1, figsize=(max(7.0, 0.4 * len(qualities)), 6.0), sharex=True)
    ax_top.bar(x, seconds, color="#888888")
    ax_top.set_yscale("log")
    ax_top.set_ylabel("reference seconds")
    ax_top.set_title(title)
    ax_bot.bar(x, recalls, color="#3465a4")
    ax_bot.set_ylim(0.0, 1.05)
    ax_bot.set_ylabel("recall")
    ax_bot.set_xticks(x, qualities, rotation=90, fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def plot_training_curves(path: str | Path, log_rows: Sequence[dict],
                         title: str = "Training progress") -> None:
    epochs = [r["epoch"] for r in log_rows]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(epochs, [r["train_loss"] for r in log_rows], label="train loss")
    ax.plot(epochs, [r["val_loss"] for r in log_rows], label="val loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss per frame")
    ax.set_title(title)
    ax.legend(loc="upper right")
    ax_lr = ax.twinx()
    ax_lr.plot(epochs, [r["lr"] for r in log_rows], color="#999999",
               linestyle="--", label="lr")
    ax_lr.set_yscale("log")
    ax_lr.set_ylabel("learning rate")
    fig.tight_layout()
    _save(fig, path)


def plot_metric_comparison(path: str | Path, runs: dict[str, dict[str, float]],
                           title: str = "Recall by comparison family") -> None:
    """Grouped bars of the WCSR families for one or more runs."""
    family_names = [f"wcsr_{m}" for m in METRIC_KINDS]
    labels = list(runs)
    x = np.arange(len(family_names))
    width = 0.8 / max(len(labels), 1)
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for i, run in enumerate(labels):
        values = [runs[run][name] for name in family_names]
        ax.bar(x + (i - (len(labels) - 1) / 2) * width, values, width, label=run)
    ax.set_xticks(x, [m for m in METRIC_KINDS])
    ax.set_ylabel("weighted recall (%)")
    ax.set_ylim(0, 105)
    ax.set_title(title)
    if labels:
        ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
