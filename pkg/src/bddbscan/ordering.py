"""Density-based traversal of a similarity graph.

Neighborhoods are similarity thresholds: ``q`` is in the eps-neighborhood of
``p`` when ``w[p, q] >= eps`` (a point is never its own neighbor). Besides the
classic DBSCAN baseline this module produces the augmented cluster ordering:
a density-seeded sweep through the graph that lists dense regions
contiguously and annotates every point with the similarity through which it
was reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .core import NOISE, ValidationError

NOISE_FLOOR = 1e-12
ADAPTIVE_CORE_FRACTION = 0.5


class PointKind(IntEnum):
    CORE = 0
    BORDER = 1
    NOISE = 2


@dataclass(frozen=True)
class TraversalConfig:
    """``epsilon=None`` switches to per-point adaptive thresholds."""

    delta: int = 10
    epsilon: float | None = None
    noise_floor: float = NOISE_FLOOR

    def __post_init__(self):
        if self.delta < 1:
            raise ValidationError("delta must be >= 1")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValidationError("epsilon must be >= 0")

    def check(self, n: int) -> None:
        if self.delta >= n:
            raise ValidationError(f"delta must be < N={n}, got {self.delta}")


@dataclass(frozen=True)
class OrderingResult:
    permutation: np.ndarray
    visit_similarity: np.ndarray
    cluster_breaks: tuple[int, ...]
    # positions where the sweep left the density-reachable region but
    # continued along a weaker edge instead of reseeding
    density_breaks: tuple[int, ...] = ()
    density: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kinds: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def sweeps(self) -> list[tuple[int, int]]:
        edges = (*self.cluster_breaks, len(self.permutation))
        return [(edges[k], edges[k + 1]) for k in range(len(edges) - 1)]


def _square(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError(f"graph must be square, got {W.shape}")
    return W


def _check_delta(delta: int, n: int) -> None:
    if not 1 <= delta < n:
        raise ValidationError(f"delta must satisfy 1 <= delta < N={n}, got {delta}")


def density_profile(W, delta: int) -> np.ndarray:
    """Similarity of every point to its ``delta``-th most similar other point."""
    W = _square(W)
    n = W.shape[0]
    _check_delta(delta, n)
    off = W.copy()
    np.fill_diagonal(off, -np.inf)
    # k-th largest of each row without the diagonal
    part = -np.partition(-off, delta - 1, axis=1)[:, delta - 1]
    return np.maximum(part, 0.0)


def neighborhoods(W, eps: float | None, delta: int) -> tuple[np.ndarray, np.ndarray]:
    """Boolean neighborhood matrix ``M[p, q] = q in N(p)`` and the threshold per point.

    With a fixed ``eps`` every point uses it. With ``eps=None`` point ``p``
    uses its own density ``c_p`` and only strictly positive weights count.
    """
    W = _square(W)
    n = W.shape[0]
    _check_delta(delta, n)
    if eps is None:
        thr = density_profile(W, delta)
        M = (W >= thr[:, None]) & (W > 0)
    else:
        thr = np.full(n, float(eps))
        M = W >= eps
    np.fill_diagonal(M, False)
    return M, thr


def classify_points(W, eps: float | None, delta: int) -> np.ndarray:
    """Core / border / noise kind of every point.

    Fixed ``eps``: core iff ``|N_eps(p)| >= delta``. Adaptive (``eps=None``):
    core iff ``c_p`` is positive and at least half the median density.
    """
    W = _square(W)
    M, thr = neighborhoods(W, eps, delta)
    if eps is None:
        core = (thr > 0) & (thr >= ADAPTIVE_CORE_FRACTION * np.median(thr))
    else:
        core = M.sum(axis=1) >= delta
    border = ~core & M[core].any(axis=0)
    kinds = np.full(W.shape[0], PointKind.NOISE, dtype=int)
    kinds[border] = PointKind.BORDER
    kinds[core] = PointKind.CORE
    return kinds


def dbscan(W, eps: float | None, delta: int) -> np.ndarray:
    """Classic DBSCAN on a similarity graph.

    Clusters are grown from core points through their neighborhoods and
    numbered in order of their lowest-index core point. A border point joins
    the cluster of its most similar core neighbor (lower cluster index on
    ties). Noise is labeled -1.
    """
    W = _square(W)
    n = W.shape[0]
    M, _ = neighborhoods(W, eps, delta)
    kinds = classify_points(W, eps, delta)
    core = kinds == PointKind.CORE
    labels = np.full(n, NOISE, dtype=int)
    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster
        stack = [seed]
        while stack:
            p = stack.pop()
            for q in np.flatnonzero(M[p] & core & (labels == NOISE)):
                labels[q] = cluster
                stack.append(q)
        cluster += 1

    for p in np.flatnonzero(kinds == PointKind.BORDER):
        owners = np.flatnonzero(core & M[:, p])
        sims = W[owners, p]
        best = sims.max()
        labels[p] = labels[owners[sims == best]].min()
    return labels


def neighborhood_graph(W, cfg: TraversalConfig) -> np.ndarray:
    """Weighted eps-neighborhood graph: keep ``w[p, q]`` iff ``q in N(p)`` or ``p in N(q)``.

    Noise points lose all their edges.
    """
    W = _square(W)
    cfg.check(W.shape[0])
    M, _ = neighborhoods(W, cfg.epsilon, cfg.delta)
    kinds = classify_points(W, cfg.epsilon, cfg.delta)
    keep = M | M.T
    noise = kinds == PointKind.NOISE
    keep[noise, :] = False
    keep[:, noise] = False
    return np.where(keep, W, 0.0)


def cluster_ordering(W, cfg: TraversalConfig | None = None) -> OrderingResult:
    """Augmented cluster ordering of a similarity graph.

    Each sweep starts at the unvisited non-noise point of highest density and
    repeatedly appends the unvisited point with the largest total similarity
    to the points already in the sweep (maximum-adjacency order). Points
    joined to the sweep by a neighborhood edge are always taken before points
    reachable only through weaker edges. A sweep ends when no remaining point
    has similarity above the noise floor to it, so a sweep never crosses a
    zero cut while positive edges remain on its side. Noise points are
    appended at the end as singleton sweeps in index order.

    ``visit_similarity[r]`` is the largest similarity between the point at
    position ``r`` and the points placed before it in the same sweep (0 for
    sweep seeds).
    """
    cfg = cfg or TraversalConfig()
    W = _square(W)
    n = W.shape[0]
    cfg.check(n)
    M, _ = neighborhoods(W, cfg.epsilon, cfg.delta)
    reach = M | M.T
    kinds = classify_points(W, cfg.epsilon, cfg.delta)
    c = density_profile(W, cfg.delta)
    noise = kinds == PointKind.NOISE
    floor = cfg.noise_floor * max(float(W.max()), 0.0)

    visited = noise.copy()
    order: list[int] = []
    visit_sim = np.zeros(n)
    breaks: list[int] = []
    density_breaks: list[int] = []
    # seeds by decreasing density, index order on ties
    seeds = iter(int(p) for p in np.lexsort((np.arange(n), -c)) if not noise[p])

    while not visited.all():
        seed = next(p for p in seeds if not visited[p])
        breaks.append(len(order))
        attach = np.zeros(n)
        best = np.zeros(n)
        tier = np.zeros(n, dtype=bool)
        p = seed
        while True:
            if p != seed and not tier[p]:
                density_breaks.append(len(order))
            visited[p] = True
            order.append(p)
            visit_sim[p] = best[p]
            attach += W[p]
            np.maximum(best, W[p], out=best)
            tier |= reach[p]
            frontier = ~visited & (best > floor)
            if not frontier.any():
                break
            strong = frontier & tier
            pool = strong if strong.any() else frontier
            p = int(np.argmax(np.where(pool, attach, -np.inf)))

    for p in np.flatnonzero(noise):
        breaks.append(len(order))
        order.append(int(p))

    perm = np.asarray(order, dtype=np.intp)
    return OrderingResult(
        permutation=perm,
        visit_similarity=visit_sim[perm],
        cluster_breaks=tuple(breaks),
        density_breaks=tuple(density_breaks),
        density=c,
        kinds=kinds,
    )
