"""Command line: ``run``, ``dbscan``, ``gen`` and ``score``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .core import ValidationError, clustering_metrics
from .data import GENERATORS, generate_synthetic, load_labels, save_csv
from .ordering import TraversalConfig
from .pipeline import (
    LIFTS,
    BaselineConfig,
    PipelineConfig,
    StageError,
    run_baseline_dbscan,
    run_pipeline,
)
from .segmentation import SegmentationConfig
from .solver import SolverConfig

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 1, 2

log = logging.getLogger("bddbscan")


def _solver_args(p):
    g = p.add_argument_group("solver")
    g.add_argument("--lam", type=float, default=None, help="ridge weight; default scales with the data")
    g.add_argument("--lam-scale", type=float, default=SolverConfig.lam_scale, help="lambda = scale * max|X^T X| when --lam is unset")
    g.add_argument("--tol", type=float, default=None, help="stopping tolerance; default 1e-6 * N")
    g.add_argument("--max-iters", type=int, default=SolverConfig.max_iters, help="iteration cap")
    g.add_argument("--no-normalize", action="store_true", help="keep raw column norms")


def _io_args(p):
    p.add_argument("input", help="CSV file, one point per row")
    p.add_argument("-o", "--output-dir", default="out", help="directory for the report and images")
    p.add_argument("--labels", action="store_true", help="last CSV column holds ground-truth labels")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def _solver_cfg(a) -> SolverConfig:
    return SolverConfig(
        lam=a.lam,
        lam_scale=a.lam_scale,
        epsilon_tol=a.tol,
        max_iters=a.max_iters,
        normalize_columns=not a.no_normalize,
    )


def _parse_params(items):
    params = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValidationError(f"parameter {item!r} is not key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        params[key.replace("-", "_")] = value
    return params


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="bddbscan", description="Block-diagonal guided DBSCAN clustering.", formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline", formatter_class=fmt)
    _io_args(run)
    _solver_args(run)
    g = run.add_argument_group("traversal and segmentation")
    g.add_argument("--delta", type=int, default=TraversalConfig.delta, help="minimum neighborhood size")
    g.add_argument("--eps", type=float, default=None, help="similarity threshold; default adapts per point")
    g.add_argument("--split-threshold", type=float, default=SegmentationConfig.split_threshold, help="largest coupling at which a block is split")
    g.add_argument("--min-block", type=int, default=SegmentationConfig.min_block, help="smallest block width")
    g.add_argument("--max-blocks", type=int, default=None, help="cap on the number of blocks")
    g.add_argument("--refine-passes", type=int, default=SegmentationConfig.refine_passes, help="refinement rounds")
    g.add_argument("--lift", choices=LIFTS, default=PipelineConfig.lift, help="Gaussian feature lift before solving")
    g.add_argument("--lift-neighbors", type=int, default=PipelineConfig.lift_neighbors, help="neighbor rank setting each point's kernel width")
    g.add_argument("--seed", type=int, default=0, help="recorded rng seed")

    db = sub.add_parser("dbscan", help="baseline DBSCAN", formatter_class=fmt)
    _io_args(db)
    _solver_args(db)
    db.add_argument("--graph", choices=("kernel", "selfrep"), default=BaselineConfig.graph, help="Gaussian kernel on the data or the self-representation graph")
    db.add_argument("--delta", type=int, default=BaselineConfig.delta, help="minimum neighborhood size")
    db.add_argument("--eps", type=float, default=None, help="default: median delta-th neighbor similarity")

    gen = sub.add_parser("gen", help="write a synthetic dataset", formatter_class=fmt)
    gen.add_argument("kind", choices=sorted(GENERATORS))
    gen.add_argument("output", help="CSV path")
    gen.add_argument("--seed", type=int, default=0, help="generator seed")
    gen.add_argument("-p", "--param", action="append", metavar="KEY=VALUE", help="generator parameter, e.g. n=200")

    score = sub.add_parser("score", help="metrics between two label files", formatter_class=fmt)
    score.add_argument("pred", help="predicted labels (last CSV column)")
    score.add_argument("truth", help="true labels (last CSV column)")
    return parser


def _cmd_run(a) -> dict:
    cfg = PipelineConfig(
        solver=_solver_cfg(a),
        traversal=TraversalConfig(delta=a.delta, epsilon=a.eps),
        segmentation=SegmentationConfig(
            min_block=a.min_block,
            max_blocks=a.max_blocks,
            refine_passes=a.refine_passes,
            split_threshold=a.split_threshold,
        ),
        normalize_columns=not a.no_normalize,
        lift=a.lift,
        lift_neighbors=a.lift_neighbors,
        rng_seed=a.seed,
        input_path=a.input,
        has_labels=a.labels,
        output_dir=a.output_dir,
        figures=not a.no_figures,
    )
    return run_pipeline(cfg).to_dict()


def _cmd_dbscan(a) -> dict:
    cfg = BaselineConfig(
        graph=a.graph,
        epsilon=a.eps,
        delta=a.delta,
        solver=_solver_cfg(a),
        input_path=a.input,
        has_labels=a.labels,
        output_dir=a.output_dir,
        figures=not a.no_figures,
    )
    return run_baseline_dbscan(cfg).to_dict()


def _cmd_gen(a) -> dict:
    X, labels = generate_synthetic(a.kind, seed=a.seed, **_parse_params(a.param))
    save_csv(a.output, X, labels)
    return {"path": a.output, "n": int(X.shape[1]), "d": int(X.shape[0])}


def _cmd_score(a) -> dict:
    return clustering_metrics(load_labels(a.pred), load_labels(a.truth))


def _brief(command, out) -> dict:
    if command in ("run", "dbscan"):
        keep = ("dataset", "n_clusters", "n_noise", "metrics", "block_diagonal_score", "warnings")
        return {k: out[k] for k in keep if k in out}
    return out


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "dbscan": _cmd_dbscan, "gen": _cmd_gen, "score": _cmd_score}[a.command]
    try:
        out = handler(a)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ValidationError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(_brief(a.command, out), indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
