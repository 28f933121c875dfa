"""End-to-end runs: graph construction, permutation, segmentation, and the DBSCAN baseline."""

from __future__ import annotations

import csv
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import plotting
from .core import (
    NOISE,
    BlockPartition,
    ValidationError,
    apply_permutation,
    as_data_matrix,
    as_labels,
    block_diagonal_score,
    clustering_metrics,
    validate_similarity,
)
from .data import load_csv
from .ordering import (
    TraversalConfig,
    cluster_ordering,
    dbscan,
    density_profile,
    neighborhood_graph,
)
from .segmentation import SegmentationConfig, segment
from .solver import SolverConfig, solve, similarity_from_representation

log = logging.getLogger(__name__)

LIFTS = ("auto", "none", "rbf")
# "auto" lifts data with at most this many features
AUTO_LIFT_MAX_DIM = 3


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    traversal: TraversalConfig = field(default_factory=TraversalConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    normalize_columns: bool = True
    # Gaussian feature lift for low-dimensional data, where a linear
    # self-representation cannot separate clusters
    lift: str = "auto"
    lift_neighbors: int = 15
    lift_lam_scale: float = 1.0
    rng_seed: int = 0
    input_path: str | None = None
    has_labels: bool = False
    output_dir: str | None = None
    figures: bool = True

    def __post_init__(self):
        if self.lift not in LIFTS:
            raise ValidationError(f"lift must be one of {LIFTS}, got {self.lift!r}")
        if self.lift_neighbors < 1:
            raise ValidationError("lift_neighbors must be >= 1")
        if self.rng_seed < 0:
            raise ValidationError("rng_seed must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output_dir")
        return d


@dataclass(frozen=True)
class BaselineConfig:
    graph: str = "kernel"  # "kernel" (Gaussian kernel on raw data) or "selfrep"
    epsilon: float | None = None  # None: median of the delta-th neighbor similarities
    delta: int = 10
    solver: SolverConfig = field(default_factory=SolverConfig)
    input_path: str | None = None
    has_labels: bool = False
    output_dir: str | None = None
    figures: bool = True

    def __post_init__(self):
        if self.graph not in ("kernel", "selfrep"):
            raise ValidationError(f"graph must be 'kernel' or 'selfrep', got {self.graph!r}")
        if self.delta < 1:
            raise ValidationError("delta must be >= 1")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValidationError("epsilon must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output_dir")
        return d


@dataclass
class RunReport:
    """Report contents plus the arrays behind them.

    ``timings`` is kept out of :meth:`to_dict` so that the JSON document is
    identical between runs with the same configuration.
    """

    report: dict
    timings: dict = field(default_factory=dict)
    labels: np.ndarray | None = None
    W: np.ndarray | None = None
    ordering: object = None
    partition: BlockPartition | None = None

    def to_dict(self) -> dict:
        return self.report

    def to_json(self) -> str:
        return json.dumps(self.report, indent=2, allow_nan=False) + "\n"

    def __getitem__(self, key):
        return self.report[key]


class _Clock:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (ValidationError, ArithmeticError, RuntimeError, ValueError, MemoryError) as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = time.perf_counter() - t0


def rbf_lift(X, k: int = 10) -> np.ndarray:
    """Self-tuning Gaussian features ``exp(-d_ij^2 / (s_i s_j))``.

    ``s_i`` is the distance from point ``i`` to its ``k``-th nearest neighbor.
    Column ``j`` of the result is the feature vector of point ``j``.
    """
    X = as_data_matrix(X)
    d2 = squareform(pdist(X.T, "sqeuclidean"))
    k = min(k, X.shape[1] - 1)
    s = np.sqrt(np.sort(d2, axis=1)[:, k])
    pos = s[s > 0]
    s = np.maximum(s, pos.min() if pos.size else 1.0)
    return np.exp(-d2 / np.outer(s, s))


def gaussian_kernel(X) -> np.ndarray:
    """Gaussian similarity with bandwidth equal to the median pairwise distance."""
    X = as_data_matrix(X)
    dist = pdist(X.T)
    d2 = squareform(dist**2)
    h = float(np.median(dist))
    h = h if h > 0 else 1.0
    return validate_similarity(np.exp(-d2 / (2 * h * h)))


def _lifted(cfg: PipelineConfig, D: int) -> bool:
    return cfg.lift == "rbf" or (cfg.lift == "auto" and D <= AUTO_LIFT_MAX_DIM)


def build_graph(X, cfg: PipelineConfig):
    """Stage-1 similarity graph and the solver state that produced it."""
    scfg = replace(cfg.solver, normalize_columns=cfg.normalize_columns)
    if _lifted(cfg, X.shape[0]):
        X = rbf_lift(X, cfg.lift_neighbors)
        if scfg.lam is None:
            scfg = replace(scfg, lam_scale=cfg.lift_lam_scale)
    state = solve(X, scfg)
    return similarity_from_representation(state.Z), state


def _load(path, has_labels, X, truth):
    if X is None:
        if path is None:
            raise ValidationError("no input: pass data or set input_path")
        X, file_truth = load_csv(path, has_labels)
        truth = file_truth if truth is None else truth
    X = as_data_matrix(X)
    if truth is not None:
        truth = as_labels(truth)
        if truth.size != X.shape[1]:
            raise ValidationError(f"{truth.size} labels for {X.shape[1]} points")
    return X, truth


def _summary(labels, truth):
    out = {
        "n_clusters": int(labels.max() + 1) if np.any(labels != NOISE) else 0,
        "n_noise": int(np.sum(labels == NOISE)),
        "labels": [int(v) for v in labels],
    }
    if truth is not None:
        out["metrics"] = clustering_metrics(labels, truth)
    return out


def _k_true(truth):
    return None if truth is None else int(len(set(truth[truth != NOISE].tolist())))


def run_pipeline(cfg: PipelineConfig, X=None, truth=None) -> RunReport:
    """Construction, permutation and segmentation; writes outputs when ``cfg.output_dir`` is set.

    ``X`` (shape ``(D, N)``) and ``truth`` override ``cfg.input_path``.
    """
    X, truth = _load(cfg.input_path, cfg.has_labels, X, truth)
    D, N = X.shape
    clock = _Clock()
    warnings = []

    with clock.stage("construction"):
        W, state = build_graph(X, cfg)
    if not state.converged:
        warnings.append(f"solver stopped at max_iters={state.iter} without converging")

    with clock.stage("permutation"):
        ordering = cluster_ordering(W, cfg.traversal)
        We = neighborhood_graph(W, cfg.traversal)
        Wp = apply_permutation(W, ordering.permutation)

    with clock.stage("segmentation"):
        bp, labels = segment(apply_permutation(We, ordering.permutation), ordering, cfg.segmentation)

    report = {
        "mode": "pipeline",
        "dataset": {"source": cfg.input_path, "n": N, "d": D, "k_true": _k_true(truth)},
        "config": cfg.to_dict(),
        "solver": {
            "lifted": _lifted(cfg, D),
            "lambda": state.lam,
            "iterations": state.iter,
            "objective": state.objective_value,
            "converged": state.converged,
            "stationarity": state.stationarity,
        },
        "ordering": {
            "permutation": [int(p) for p in ordering.permutation],
            "cluster_breaks": list(ordering.cluster_breaks),
            "density_breaks": list(ordering.density_breaks),
        },
        "partition": {"n": bp.n, "boundaries": list(bp.boundaries), "n_blocks": bp.n_blocks},
        "block_diagonal_score": {
            "before": block_diagonal_score(W, bp),
            "after": block_diagonal_score(Wp, bp),
        },
        **_summary(labels, truth),
        "warnings": warnings,
    }
    result = RunReport(report, clock.timings, labels, W, ordering, bp)
    if cfg.output_dir is not None:
        with clock.stage("output"):
            write_outputs(result, cfg.output_dir, X=X, Wp=Wp, figures=cfg.figures)
    return result


def baseline_graph(X, cfg: BaselineConfig) -> np.ndarray:
    if cfg.graph == "kernel":
        return gaussian_kernel(X)
    return similarity_from_representation(solve(X, cfg.solver).Z)


def run_baseline_dbscan(cfg: BaselineConfig, X=None, truth=None) -> RunReport:
    """Classic single-eps DBSCAN on the kernel graph or the stage-1 graph."""
    X, truth = _load(cfg.input_path, cfg.has_labels, X, truth)
    D, N = X.shape
    clock = _Clock()
    with clock.stage("construction"):
        W = baseline_graph(X, cfg)
    with clock.stage("dbscan"):
        if not cfg.delta < N:
            raise ValidationError(f"delta must be < N={N}, got {cfg.delta}")
        eps = float(np.median(density_profile(W, cfg.delta))) if cfg.epsilon is None else cfg.epsilon
        labels = dbscan(W, eps, cfg.delta)

    report = {
        "mode": "baseline",
        "dataset": {"source": cfg.input_path, "n": N, "d": D, "k_true": _k_true(truth)},
        "config": cfg.to_dict(),
        "epsilon": eps,
        **_summary(labels, truth),
        "warnings": [],
    }
    result = RunReport(report, clock.timings, labels, W)
    if cfg.output_dir is not None:
        with clock.stage("output"):
            write_outputs(result, cfg.output_dir, X=X, figures=cfg.figures)
    return result


def write_outputs(result: RunReport, output_dir, X=None, Wp=None, figures=True) -> Path:
    """Report, labels, ordering, graph, heatmaps and (optionally) PNG figures."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(result.to_json(), encoding="utf-8")
    (out / "timings.json").write_text(json.dumps(result.timings, indent=2) + "\n", encoding="utf-8")

    with (out / "labels.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["point", "label"])
        w.writerows((i, int(v)) for i, v in enumerate(result.labels))

    np.save(out / "similarity.npy", np.asarray(result.W))
    plotting.emit_heatmap(result.W, out / "heatmap_raw.pgm")

    o = result.ordering
    if o is not None:
        with (out / "ordering.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["position", "point", "visit_similarity", "kind"])
            for r, p in enumerate(o.permutation):
                w.writerow([r, int(p), repr(float(o.visit_similarity[r])), int(o.kinds[p])])
        plotting.emit_heatmap(Wp, out / "heatmap_permuted.pgm")

    if figures:
        if o is not None:
            plotting.plot_heatmaps(result.W, Wp, result.partition, out / "heatmaps.png")
            plotting.plot_ordering(o.visit_similarity, o.cluster_breaks, result.partition, out / "ordering.png")
        if X is not None and X.shape[0] >= 2:
            plotting.plot_clusters(X, result.labels, out / "clusters.png")
    return out
