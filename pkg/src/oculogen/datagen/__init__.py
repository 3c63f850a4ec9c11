"""Dataset configuration, batch generation, previews, statistics and k-NN evaluation."""

from .config import DatasetSpec, KNOWN_KEYS, grid_values, load_config, parse_config, parse_dict
from .engine import Pose, find_pose, generate, load_manifest, plan_jobs, pose_grid, render_one
from .identities import derive_seed, image_seed, synthesize_identity
from .knn import KnnResult, compare_to_shuffled, eval_knn
from .report import preview, sheet_size, stats

__all__ = [
    "DatasetSpec",
    "KNOWN_KEYS",
    "KnnResult",
    "Pose",
    "compare_to_shuffled",
    "derive_seed",
    "eval_knn",
    "find_pose",
    "generate",
    "grid_values",
    "image_seed",
    "load_config",
    "load_manifest",
    "parse_config",
    "parse_dict",
    "plan_jobs",
    "pose_grid",
    "preview",
    "render_one",
    "sheet_size",
    "stats",
    "synthesize_identity",
]
