"""Block-diagonal guided DBSCAN: self-representation graph, density ordering, block segmentation."""

from .core import (
    NOISE,
    BlockPartition,
    ValidationError,
    adjusted_rand_index,
    apply_permutation,
    block_diagonal_score,
    clustering_metrics,
    hungarian_accuracy,
    normalized_mutual_info,
    validate_similarity,
)
from .data import generate_synthetic, load_csv, save_csv
from .ordering import OrderingResult, TraversalConfig, classify_points, cluster_ordering, dbscan, density_profile
from .pipeline import BaselineConfig, PipelineConfig, RunReport, StageError, run_baseline_dbscan, run_pipeline
from .plotting import emit_heatmap
from .segmentation import SegmentationConfig, brute_force_segment, segment
from .solver import SolverConfig, SolverError, solve, similarity_from_representation

__version__ = "0.1.0"
