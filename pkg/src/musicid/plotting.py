"""Figures for the report path, rendered headless to PNG."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "legend.fontsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "svg.hashsalt": "musicid",
}


def _save(fig, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software/date metadata so reruns are byte-identical
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def confusion_figure(confusion: np.ndarray, labels: Sequence[str], path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        n = len(labels)
        size = max(3.5, 0.32 * n + 1.5)
        fig, ax = plt.subplots(figsize=(size, size))
        im = ax.imshow(confusion, cmap="Blues")
        ax.set_xticks(range(n), labels, rotation=90)
        ax.set_yticks(range(n), labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        if n <= 25:
            hi = confusion.max() if confusion.size else 0
            for i in range(confusion.shape[0]):
                for j in range(confusion.shape[1]):
                    if confusion[i, j]:
                        ax.text(j, i, str(confusion[i, j]), ha="center", va="center", fontsize=6,
                                color="white" if confusion[i, j] > hi / 2 else "black")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def importance_figure(names: Sequence[str], values: Sequence[float], path, top: int | None = None) -> Path:
    """Bar chart of importances sorted descending (all features unless ``top``)."""
    order = sorted(range(len(names)), key=lambda i: (-values[i], names[i]))
    if top is not None:
        order = order[:top]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6.0, 0.12 * len(order) + 2), 3.5))
        ax.bar(range(len(order)), [values[i] for i in order], color="tab:blue")
        ax.set_xticks(range(len(order)), [names[i] for i in order], rotation=90, fontsize=5)
        ax.set_ylabel("gini importance")
        ax.set_xlim(-0.6, len(order) - 0.4)
        fig.tight_layout()
        return _save(fig, path)


def feature_boxplot(values: np.ndarray, users: np.ndarray, feature: str, path) -> Path:
    """Per-user distribution of one feature."""
    labels = sorted(set(users.tolist()))
    data = [values[users == u] for u in labels]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(5.0, 0.3 * len(labels) + 1.5), 3.0))
        ax.boxplot(data)
        ax.set_xticks(range(1, len(labels) + 1), labels, rotation=90)
        ax.set_ylabel(feature)
        fig.tight_layout()
        return _save(fig, path)


def accuracy_bars(groups: Sequence[str], series: dict[str, Sequence[float | None]], path, title: str = "") -> Path:
    """Grouped bars: one group per scenario, one bar per series; missing values are skipped."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(5.0, 0.7 * len(groups) + 1.5), 3.2))
        width = 0.8 / max(1, len(series))
        for k, (name, vals) in enumerate(series.items()):
            xs = [i + (k - (len(series) - 1) / 2) * width for i, v in enumerate(vals) if v is not None]
            ys = [100.0 * v for v in vals if v is not None]
            ax.bar(xs, ys, width, label=name)
        ax.set_xticks(range(len(groups)), groups, rotation=30, ha="right")
        ax.set_ylabel("accuracy (%)")
        ax.set_ylim(0, 100)
        ax.legend(loc="lower right")
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
