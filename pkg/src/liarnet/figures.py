"""Matplotlib renderings saved next to the text/JSON reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import LABELS


def save_confusion_heatmap(matrix, path, title=None):
    """Render a confusion matrix as an annotated heatmap PNG."""
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    im = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(len(LABELS)), LABELS, rotation=45, ha="right")
    ax.set_yticks(range(len(LABELS)), LABELS)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    if title:
        ax.set_title(title)
    threshold = matrix.max() / 2 if matrix.max() else 0.5
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            ax.text(j, i, str(int(matrix[i, j])), ha="center", va="center",
                    color="white" if matrix[i, j] > threshold else "black", fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
    return Path(path)


def save_training_curves(log, path, title=None):
    """Plot mean loss (and validation accuracy, when present) per epoch."""
    epochs = [r.epoch for r in log]
    losses = [r.mean_loss for r in log]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(epochs, losses, marker="o", markersize=3, label="mean loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    accs = [r.val_accuracy for r in log]
    if any(a is not None for a in accs):
        ax2 = ax.twinx()
        ax2.plot(epochs, accs, marker="s", markersize=3, color="tab:orange",
                 label="val accuracy")
        ax2.set_ylabel("validation accuracy")
        ax2.set_ylim(0.0, 1.0)
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
    return Path(path)
