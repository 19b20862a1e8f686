"""Figure styling and the two report figures (training curves, confusion matrix)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "legend.fontsize": 9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "svg.hashsalt": "shemo-ser",
}
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def figsize(width: float = 8.0, ratio: float = GOLDEN) -> tuple[float, float]:
    return width, width * ratio


def render(fig, fmt: str = "png") -> bytes:
    """Serialize a figure without creation-time metadata, then close it."""
    buf = io.BytesIO()
    meta = {"Software": None} if fmt == "png" else {"Date": None, "Creator": None}
    fig.savefig(buf, format=fmt, bbox_inches="tight", metadata=meta)
    plt.close(fig)
    return buf.getvalue()


def curves_figure(epochs, train_loss, val_loss, train_acc, val_acc, title: str = ""):
    with plt.rc_context(RC):
        fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=figsize(9.0, 0.4))
        ax_loss.plot(epochs, train_loss, label="train")
        ax_loss.plot(epochs, val_loss, label="validation")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("cross-entropy loss")
        ax_loss.legend(frameon=False)
        ax_acc.plot(epochs, train_acc, label="train")
        ax_acc.plot(epochs, val_acc, label="validation")
        ax_acc.set_xlabel("epoch")
        ax_acc.set_ylabel("accuracy")
        ax_acc.set_ylim(0.0, 1.02)
        ax_acc.legend(frameon=False)
        if title:
            fig.suptitle(title)
    return fig


def confusion_figure(matrix, labels, title: str = ""):
    m = np.asarray(matrix)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.2, 4.4))
        im = ax.imshow(m, cmap="Blues")
        ax.set_xticks(range(len(labels)), labels, rotation=35, ha="right")
        ax.set_yticks(range(len(labels)), labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        thresh = m.max() / 2 if m.size and m.max() > 0 else 0.5
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                ax.text(j, i, str(m[i, j]), ha="center", va="center", color="white" if m[i, j] > thresh else "black")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        if title:
            ax.set_title(title)
    return fig
