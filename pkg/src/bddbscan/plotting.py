"""Heatmap images and report figures."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import NOISE, BlockPartition


def heatmap_pixels(W) -> np.ndarray:
    """8-bit gray levels ``round(255 * w / w_max)``; all zero when ``w_max`` is 0."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"heatmap needs a square matrix, got {W.shape}")
    wmax = float(W.max()) if W.size else 0.0
    if wmax <= 0:
        return np.zeros(W.shape, dtype=np.uint8)
    # round half up; np.rint would round half to even
    return np.floor(255.0 * np.clip(W, 0, None) / wmax + 0.5).astype(np.uint8)


def emit_heatmap(W, path) -> None:
    """Write ``W`` as a binary PGM (P5, maxval 255), one pixel per entry."""
    pix = heatmap_pixels(W)
    rows, cols = pix.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5 {cols} {rows} 255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    """Parse a P5 file written by :func:`emit_heatmap`."""
    data = Path(path).read_bytes()
    head, _, body = data.partition(b"\n")
    magic, cols, rows, maxval = head.split()
    if magic != b"P5" or int(maxval) != 255:
        raise ValueError(f"{path}: not an 8-bit P5 image")
    return np.frombuffer(body, dtype=np.uint8).reshape(int(rows), int(cols))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _block_outline(ax, bp: BlockPartition | None):
    if bp is None:
        return
    for a, b in bp.blocks():
        ax.add_patch(
            _pyplot().Rectangle((a - 0.5, a - 0.5), b - a, b - a, fill=False, ec="tab:red", lw=0.8)
        )


def plot_heatmaps(W, Wp, bp: BlockPartition | None, path) -> None:
    """Side-by-side similarity graph before and after permutation."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9, 4.5))
    for ax, M, title in ((axes[0], W, "input order"), (axes[1], Wp, "cluster ordering")):
        ax.imshow(M, cmap="gray_r", interpolation="nearest")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
    _block_outline(axes[1], bp)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_ordering(visit_similarity, cluster_breaks, bp: BlockPartition | None, path) -> None:
    """Visit similarity along the ordering, with restarts and block boundaries marked."""
    plt = _pyplot()
    v = np.asarray(visit_similarity, dtype=float)
    fig, ax = plt.subplots(figsize=(9, 3))
    ax.bar(np.arange(v.size), v, width=1.0, color="0.35")
    for b in cluster_breaks:
        ax.axvline(b - 0.5, color="tab:blue", lw=0.6, ls=":")
    if bp is not None:
        for b in bp.boundaries:
            ax.axvline(b - 0.5, color="tab:red", lw=1.0)
    ax.set_xlim(-0.5, v.size - 0.5)
    ax.set_xlabel("position")
    ax.set_ylabel("visit similarity")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_clusters(X, labels, path) -> None:
    """Scatter of the first two coordinates colored by cluster; noise in gray crosses."""
    plt = _pyplot()
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(5, 5))
    noise = labels == NOISE
    y = X[1] if X.shape[0] > 1 else np.zeros(X.shape[1])
    ax.scatter(X[0, ~noise], y[~noise], c=labels[~noise], cmap="tab10", s=12)
    if noise.any():
        ax.scatter(X[0, noise], y[noise], c="0.6", marker="x", s=12)
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
