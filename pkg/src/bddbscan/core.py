"""Shared types, permutation algebra and clustering-quality metrics.

Conventions used across the package:

* a data matrix is a ``(D, N)`` float array whose columns are the points;
* a similarity graph is a symmetric ``(N, N)`` array with zero diagonal and
  nonnegative finite entries;
* a permutation is an integer array ``order`` such that the permuted graph
  is ``W[order][:, order]``;
* cluster labels are integers, ``-1`` marks noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

NOISE = -1


class ValidationError(ValueError):
    """Raised when an input violates a type invariant."""


def as_data_matrix(X) -> np.ndarray:
    """Validate and return ``X`` as a ``(D, N)`` float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"data matrix must be 2-D, got ndim={X.ndim}")
    D, N = X.shape
    if D < 1 or N < 2:
        raise ValidationError(f"data matrix needs D >= 1 and N >= 2, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("data matrix contains non-finite entries")
    return X


def validate_similarity(W) -> np.ndarray:
    """Return a valid similarity graph built from the square matrix ``W``.

    The result is ``(W + W.T) / 2`` with the diagonal set to zero. Negative or
    non-finite entries are rejected rather than repaired.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError(f"similarity matrix must be square, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValidationError("similarity matrix contains non-finite entries")
    if np.any(W < 0):
        raise ValidationError("similarity matrix contains negative entries")
    out = 0.5 * (W + W.T)
    np.fill_diagonal(out, 0.0)
    out.setflags(write=False)
    return out


def as_permutation(order, n: int | None = None) -> np.ndarray:
    order = np.asarray(order)
    if order.ndim != 1 or not np.issubdtype(order.dtype, np.integer):
        raise ValidationError("permutation must be a 1-D integer sequence")
    if n is not None and order.size != n:
        raise ValidationError(f"permutation has length {order.size}, expected {n}")
    if not np.array_equal(np.sort(order), np.arange(order.size)):
        raise ValidationError("permutation is not a bijection on 0..N-1")
    return order.astype(np.intp)


def inverse_permutation(order) -> np.ndarray:
    order = as_permutation(order)
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    return inv


def permutation_matrix(order) -> np.ndarray:
    """Dense matrix ``G`` with ``G[r, order[r]] = 1`` so that ``G W G.T`` permutes ``W``."""
    order = as_permutation(order)
    G = np.zeros((order.size, order.size))
    G[np.arange(order.size), order] = 1.0
    return G


def apply_permutation(W, order) -> np.ndarray:
    """Permuted graph with ``out[r, c] = W[order[r], order[c]]``."""
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError("graph must be square")
    order = as_permutation(order, W.shape[0])
    return W[np.ix_(order, order)]


@dataclass(frozen=True)
class BlockPartition:
    """Cut positions splitting ``0..n-1`` into contiguous blocks.

    Block ``k`` spans ``[edges[k], edges[k+1])`` where ``edges`` is
    ``(0, *boundaries, n)``.
    """

    boundaries: tuple[int, ...]
    n: int

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if self.n < 1:
            raise ValidationError("partition size must be positive")
        if any(x <= 0 or x >= self.n for x in b):
            raise ValidationError(f"boundaries must lie in (0, {self.n}), got {b}")
        if any(b1 >= b2 for b1, b2 in zip(b, b[1:])):
            raise ValidationError(f"boundaries must be strictly increasing, got {b}")

    @property
    def edges(self) -> tuple[int, ...]:
        return (0, *self.boundaries, self.n)

    @property
    def n_blocks(self) -> int:
        return len(self.boundaries) + 1

    @property
    def widths(self) -> tuple[int, ...]:
        e = self.edges
        return tuple(e[k + 1] - e[k] for k in range(len(e) - 1))

    def blocks(self) -> list[tuple[int, int]]:
        e = self.edges
        return [(e[k], e[k + 1]) for k in range(len(e) - 1)]

    def block_ids(self) -> np.ndarray:
        """Block index of every (permuted) position."""
        ids = np.zeros(self.n, dtype=int)
        for b in self.boundaries:
            ids[b:] += 1
        return ids


def block_diagonal_score(W, bp: BlockPartition) -> float:
    """Fraction of off-diagonal weight lying inside the diagonal blocks.

    Returns 1.0 for a graph with no weight at all.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] != bp.n:
        raise ValidationError(f"partition of size {bp.n} does not match graph {W.shape}")
    ids = bp.block_ids()
    same = ids[:, None] == ids[None, :]
    np.fill_diagonal(same, False)
    within = float(W[same].sum())
    cross = float(W[ids[:, None] != ids[None, :]].sum())
    # x / (x + 0) is exactly 1, so a perfect partition scores exactly 1.0
    if within + cross <= 0:
        return 1.0
    return within / (within + cross)


def as_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValidationError("labels must be 1-D")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise ValidationError("labels must be integers")
    labels = labels.astype(int)
    if np.any(labels < NOISE):
        raise ValidationError("labels must be >= -1")
    return labels


def canonical_labels(labels) -> np.ndarray:
    """Relabel clusters as 0..K-1 in order of first appearance; noise stays -1."""
    labels = as_labels(labels)
    out = np.full_like(labels, NOISE)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred, truth = as_labels(pred), as_labels(truth)
    if pred.shape != truth.shape:
        raise ValidationError(f"label lengths differ: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ValidationError("labels are empty")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    """Counts ``C[i, j]`` of points with the i-th distinct pred label and j-th truth label."""
    pred, truth = _pair(pred, truth)
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    C = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(C, (pi, ti), 1)
    return C


def hungarian_accuracy(pred, truth) -> float:
    """Fraction of points correct under the best one-to-one label matching.

    Noise in ``pred`` never matches a cluster; it is correct only where
    ``truth`` is also noise.
    """
    pred, truth = _pair(pred, truth)
    both_noise = int(np.sum((pred == NOISE) & (truth == NOISE)))
    keep = (pred != NOISE) & (truth != NOISE)
    matched = 0
    if np.any(keep):
        C = contingency(pred[keep], truth[keep])
        rows, cols = linear_sum_assignment(-C)
        matched = int(C[rows, cols].sum())
    return (matched + both_noise) / pred.size


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2


def adjusted_rand_index(pred, truth) -> float:
    """Hubert-Arabie adjusted Rand index; noise counts as one more label."""
    C = contingency(pred, truth)
    n = C.sum()
    sum_ij = _comb2(C).sum()
    sum_a = _comb2(C.sum(axis=1)).sum()
    sum_b = _comb2(C.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all-one-cluster or all-singletons)
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def normalized_mutual_info(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies.

    Two single-cluster labelings score 1.0 by convention.
    """
    C = contingency(pred, truth).astype(float)
    n = C.sum()
    h_pred, h_truth = _entropy(C.sum(axis=1)), _entropy(C.sum(axis=0))
    if h_pred == 0 and h_truth == 0:
        return 1.0
    pij = C / n
    outer = np.outer(C.sum(axis=1), C.sum(axis=0)) / n**2
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    denom = 0.5 * (h_pred + h_truth)
    return float(np.clip(mi / denom, 0.0, 1.0))


def clustering_metrics(pred, truth) -> dict[str, float]:
    return {
        "accuracy": hungarian_accuracy(pred, truth),
        "ari": adjusted_rand_index(pred, truth),
        "nmi": normalized_mutual_info(pred, truth),
    }


def labels_from_blocks(order: Sequence[int], bp: BlockPartition) -> np.ndarray:
    """Map block membership of permuted positions back to original point indexes."""
    order = as_permutation(order, bp.n)
    labels = np.empty(bp.n, dtype=int)
    labels[order] = bp.block_ids()
    return labels
