"""Matplotlib figures written next to the CSV/JSON-lines outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_PNG_META = {"Software": None}


def loss_curve(epoch_losses: list[dict], path) -> None:
    keys = [k for k in epoch_losses[0] if k.endswith("loss")] if epoch_losses else []
    fig, ax = plt.subplots(figsize=(5, 3.5))
    epochs = [e["epoch"] for e in epoch_losses]
    for k in keys:
        ax.plot(epochs, [e[k] for e in epoch_losses], marker="o", label=k)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    if keys:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    plt.close(fig)


def image_grid(images: list[np.ndarray], titles: list[str], path, cols: int = 10) -> None:
    rows = max(1, -(-len(images) // cols))
    fig, axes = plt.subplots(rows, cols, figsize=(1.2 * cols, 1.3 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for ax, im, t in zip(axes.ravel(), images, titles):
        ax.imshow(np.clip(im, 0, 1), interpolation="nearest")
        ax.set_title(t, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    plt.close(fig)
