"""Split-and-refine search for the diagonal blocks of a permuted graph.

Partitions are scored by

    objective = block_diagonal_score - threshold * coverage

where ``coverage`` is the fraction of point pairs that fall inside a block.
Both terms add up block by block, so the objective of a partition is a sum
of per-block contributions. Splitting a block at a cut raises the objective
exactly when the mean weight across the cut is below ``threshold`` times the
mean off-diagonal weight of the whole graph, i.e. when :func:`coupling` is
below the threshold. Everything is a ratio of weights, so decisions do not
change when the graph is rescaled.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import NOISE, BlockPartition, ValidationError, labels_from_blocks
from .ordering import OrderingResult

FLOOR = 1e-300
BRUTE_FORCE_MAX_N = 14


@dataclass(frozen=True)
class SegmentationConfig:
    min_block: int = 1
    max_blocks: int | None = None
    refine_passes: int = 5
    split_threshold: float = 0.05

    def __post_init__(self):
        if self.min_block < 1:
            raise ValidationError("min_block must be >= 1")
        if self.max_blocks is not None and self.max_blocks < 1:
            raise ValidationError("max_blocks must be >= 1")
        if self.refine_passes < 1:
            raise ValidationError("refine_passes must be >= 1")
        if not 0 <= self.split_threshold <= 1:
            raise ValidationError("split_threshold must lie in [0, 1]")


class BlockSums:
    """Constant-time sums of rectangular sub-blocks of a square graph."""

    def __init__(self, W):
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError(f"graph must be square, got {W.shape}")
        self.n = W.shape[0]
        W = W.copy()
        np.fill_diagonal(W, 0.0)
        S = np.zeros((self.n + 1, self.n + 1))
        S[1:, 1:] = W.cumsum(axis=0).cumsum(axis=1)
        self.S = S
        self.total = float(S[-1, -1])
        pairs = self.n * (self.n - 1)
        self.mean = self.total / pairs if pairs else 0.0

    def rect(self, r0, r1, c0, c1) -> float:
        S = self.S
        return float(S[r1, c1] - S[r0, c1] - S[r1, c0] + S[r0, c0])

    def block(self, a, b) -> float:
        return self.rect(a, b, a, b)

    def contribution(self, a, b, threshold) -> float:
        """Objective contribution of block ``[a, b)`` in units of total weight."""
        pairs = (b - a) * (b - a - 1)
        return self.block(a, b) - threshold * self.mean * pairs


def objective(Wp, bp: BlockPartition, threshold: float = 0.05) -> float:
    """``block_diagonal_score - threshold * coverage`` of a partition."""
    sums = Wp if isinstance(Wp, BlockSums) else BlockSums(Wp)
    if bp.n != sums.n:
        raise ValidationError(f"partition of size {bp.n} does not match graph of size {sums.n}")
    n = sums.n
    pairs = n * (n - 1)
    coverage = sum(w * (w - 1) for w in bp.widths) / pairs if pairs else 1.0
    if sums.total <= 0:
        return 1.0 - threshold * coverage
    score = sum(sums.block(a, b) for a, b in bp.blocks()) / sums.total
    return score - threshold * coverage


def _raw_objective(sums: BlockSums, edges, threshold) -> float:
    """Objective up to the positive factor and offset shared by all partitions."""
    if sums.total <= 0:
        return -sum((b - a) * (b - a - 1) for a, b in zip(edges, edges[1:]))
    return sum(sums.contribution(a, b, threshold) for a, b in zip(edges, edges[1:]))


def coupling(Wp, cut: int, lo: int, hi: int) -> float:
    """Mean weight across ``cut`` inside ``[lo, hi)`` relative to the graph's mean weight."""
    sums = Wp if isinstance(Wp, BlockSums) else BlockSums(Wp)
    if not (0 <= lo < cut < hi <= sums.n):
        raise ValidationError(f"need 0 <= lo < cut < hi <= {sums.n}, got {lo}, {cut}, {hi}")
    cross = sums.rect(lo, cut, cut, hi) / ((cut - lo) * (hi - cut))
    return cross / (sums.mean + FLOOR)


def _best_cut(sums, lo, hi, cfg, candidates=()):
    """Lowest-coupling admissible cut of ``[lo, hi)``, preferring the given candidates."""
    admissible = range(lo + cfg.min_block, hi - cfg.min_block + 1)
    preferred = [c for c in candidates if c in admissible]
    for pool in (preferred, admissible):
        best = None
        for cut in pool:
            k = coupling(sums, cut, lo, hi)
            if best is None or (k, cut) < best:
                best = (k, cut)
        if best is not None and best[0] < cfg.split_threshold:
            return best
    return None


def split(Wp, cfg: SegmentationConfig | None = None, candidates=()) -> BlockPartition:
    """Recursive splitting at the lowest-coupling cut while coupling is below threshold.

    Segments are processed in order of their best coupling, so with
    ``max_blocks`` set the strongest separations are kept.
    """
    cfg = cfg or SegmentationConfig()
    sums = Wp if isinstance(Wp, BlockSums) else BlockSums(Wp)
    cuts: list[int] = []
    heap = []

    def push(lo, hi):
        found = _best_cut(sums, lo, hi, cfg, candidates)
        if found is not None:
            heapq.heappush(heap, (found[0], found[1], lo, hi))

    push(0, sums.n)
    while heap:
        if cfg.max_blocks is not None and len(cuts) + 1 >= cfg.max_blocks:
            break
        _, cut, lo, hi = heapq.heappop(heap)
        cuts.append(cut)
        push(lo, cut)
        push(cut, hi)
    return BlockPartition(tuple(sorted(cuts)), sums.n)


def _slide(sums, edges, k, cfg) -> bool:
    """Move boundary ``edges[k]`` to its best position between its neighbors."""
    a, cur, b = edges[k - 1], edges[k], edges[k + 1]
    reach = min(cur - a, b - cur) - 1
    lo = max(a + cfg.min_block, cur - reach)
    hi = min(b - cfg.min_block, cur + reach)
    thr = cfg.split_threshold

    def value(t):
        return sums.contribution(a, t, thr) + sums.contribution(t, b, thr)

    best_t, best_v = cur, value(cur)
    tol = 1e-12 * max(abs(sums.total), 1e-300)
    for t in range(lo, hi + 1):
        v = value(t)
        if v > best_v + tol:
            best_t, best_v = t, v
    if best_t != cur:
        edges[k] = best_t
        return True
    return False


def _merge_once(sums, edges, cfg) -> bool:
    """Merge the adjacent pair whose mutual coupling is highest, if it reaches the threshold."""
    best = None
    for k in range(1, len(edges) - 1):
        k_val = coupling(sums, edges[k], edges[k - 1], edges[k + 1])
        if k_val >= cfg.split_threshold and (best is None or k_val > best[0]):
            best = (k_val, k)
    if best is None:
        return False
    del edges[best[1]]
    return True


def _resplit_once(sums, edges, cfg) -> bool:
    for k in range(len(edges) - 1):
        if cfg.max_blocks is not None and len(edges) - 1 >= cfg.max_blocks:
            return False
        found = _best_cut(sums, edges[k], edges[k + 1], cfg)
        if found is not None:
            edges.insert(k + 1, found[1])
            return True
    return False


def refine(Wp, bp: BlockPartition, cfg: SegmentationConfig | None = None) -> BlockPartition:
    """Improve a partition by boundary sliding, merging and re-splitting.

    Each pass slides every boundary within the smaller of its two blocks to
    the position of highest objective, merges adjacent blocks whose mutual
    coupling reaches the threshold, and splits blocks that still contain a
    cut below it. Every move strictly raises :func:`objective`; passes stop
    early at a fixed point.
    """
    cfg = cfg or SegmentationConfig()
    sums = Wp if isinstance(Wp, BlockSums) else BlockSums(Wp)
    if bp.n != sums.n:
        raise ValidationError(f"partition of size {bp.n} does not match graph of size {sums.n}")
    edges = list(bp.edges)
    for _ in range(cfg.refine_passes):
        changed = False
        for k in range(1, len(edges) - 1):
            changed |= _slide(sums, edges, k, cfg)
        while _merge_once(sums, edges, cfg):
            changed = True
        while _resplit_once(sums, edges, cfg):
            changed = True
        if not changed:
            break
    return BlockPartition(tuple(edges[1:-1]), sums.n)


def _contributions(sums: BlockSums, threshold, min_block) -> np.ndarray:
    """``C[i, j]`` = objective contribution of block ``[i, j)``; ``-inf`` where not admissible."""
    n, S = sums.n, sums.S
    i = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    d = np.diag(S)
    block = d[j] - S[i, j] - S[j, i] + d[i]
    pairs = (j - i) * (j - i - 1)
    if sums.total <= 0:
        C = -pairs.astype(float)
    else:
        C = block - threshold * sums.mean * pairs
    return np.where(j - i >= min_block, C, -np.inf)


def optimal_partition(Wp, cfg: SegmentationConfig | None = None) -> BlockPartition:
    """Exact maximiser of the segmentation objective by dynamic programming.

    Ties go to fewer blocks, then to lexicographically smaller boundaries,
    matching :func:`brute_force_segment` but in ``O(K N^2)`` time.
    """
    cfg = cfg or SegmentationConfig()
    sums = Wp if isinstance(Wp, BlockSums) else BlockSums(Wp)
    n = sums.n
    C = _contributions(sums, cfg.split_threshold, cfg.min_block)
    tol = 1e-12 * max(abs(sums.total), 1e-300)
    K = n // cfg.min_block if cfg.max_blocks is None else min(cfg.max_blocks, n // cfg.min_block)
    if K < 1:
        raise ValidationError("no partition satisfies min_block")
    # U[k, i]: best value for splitting [i, n) into exactly k blocks
    U = np.full((K + 1, n + 1), -np.inf)
    U[0, n] = 0.0
    for k in range(1, K + 1):
        U[k, :n] = np.max(C[:n, :] + U[k - 1][None, :], axis=1)
    top = U[1:, 0].max()
    k = 1 + int(np.flatnonzero(U[1:, 0] >= top - tol)[0])
    cuts, a = [], 0
    while k > 1:
        need = U[k, a] - tol
        c = int(np.flatnonzero(C[a] + U[k - 1] >= need)[0])
        cuts.append(c)
        a, k = c, k - 1
    return BlockPartition(tuple(cuts), n)


def segment(Wp, ordering: OrderingResult, cfg: SegmentationConfig | None = None):
    """Blocks of the permuted graph and the cluster labels they induce.

    Runs split and refine, then checks the result against the exact optimum
    of the same objective (:func:`optimal_partition`) and keeps the optimum
    when the local moves stalled below it.

    ``Wp`` must be the graph permuted by ``ordering.permutation``. Points that
    formed a singleton sweep reached with zero similarity (the traversal's
    noise points) are labeled noise and kept out of the block search.

    Returns
    -------
    (BlockPartition, labels)
    """
    cfg = cfg or SegmentationConfig()
    Wp = np.asarray(Wp, dtype=float)
    n = len(ordering.permutation)
    if Wp.shape != (n, n):
        raise ValidationError(f"permutation of length {n} does not match graph {Wp.shape}")

    sweeps = ordering.sweeps
    noise_pos = {a for a, b in sweeps if b - a == 1 and ordering.visit_similarity[a] == 0}
    # noise singletons sit at the tail of the ordering; segment the rest as one graph
    m = n
    while m > 0 and (m - 1) in noise_pos:
        m -= 1
    inner = sorted(noise_pos & set(range(m)))

    if m >= 2:
        sums = BlockSums(Wp[:m, :m])
        candidates = sorted({b for b in (*ordering.cluster_breaks, *ordering.density_breaks) if 0 < b < m})
        bp = refine(sums, split(sums, cfg, candidates), cfg)
        best = optimal_partition(sums, cfg)
        tol = 1e-12 * max(abs(sums.total), 1e-300)
        thr = cfg.split_threshold
        if _raw_objective(sums, best.edges, thr) > _raw_objective(sums, bp.edges, thr) + tol:
            bp = best
        cuts = set(bp.boundaries)
    else:
        cuts = set()
    # isolated points inside the body become their own blocks
    for p in inner:
        cuts.update(c for c in (p, p + 1) if 0 < c < m)
    cuts.update(range(max(m, 1), n))
    bp = BlockPartition(tuple(sorted(cuts)), n)

    labels = labels_from_blocks(ordering.permutation, bp)
    noise_points = [int(ordering.permutation[p]) for p in noise_pos]
    labels[noise_points] = NOISE
    return bp, _compact(labels)


def _compact(labels: np.ndarray) -> np.ndarray:
    out = labels.copy()
    kept = sorted(set(labels[labels != NOISE].tolist()))
    remap = {old: new for new, old in enumerate(kept)}
    for i, lab in enumerate(labels):
        if lab != NOISE:
            out[i] = remap[lab]
    return out


def brute_force_segment(Wp, max_blocks: int | None = None, threshold: float = 0.05, min_block: int = 1):
    """Exhaustive search over all contiguous partitions for the best objective.

    Ties go to fewer blocks, then to lexicographically smaller boundaries.
    """
    sums = BlockSums(Wp)
    n = sums.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValidationError(f"brute force is limited to N <= {BRUTE_FORCE_MAX_N}, got {n}")
    max_k = n if max_blocks is None else max_blocks
    best = None
    tol = 1e-12 * max(abs(sums.total), 1e-300)
    for k in range(min(max_k, n)):
        for cuts in combinations(range(1, n), k):
            edges = (0, *cuts, n)
            if any(b - a < min_block for a, b in zip(edges, edges[1:])):
                continue
            v = _raw_objective(sums, edges, threshold)
            # strict improvement needed: earlier candidates have fewer blocks or smaller boundaries
            if best is None or v > best[0] + tol:
                best = (v, cuts)
    if best is None:
        raise ValidationError("no partition satisfies min_block")
    return BlockPartition(best[1], n)
