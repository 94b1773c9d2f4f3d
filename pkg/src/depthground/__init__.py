"""Metric depth completion by fusing sensor depth with a monocular prior.

Dense depth and patch-wise affine alignment parameters are optimized jointly
under robust (Huber) factors, then the affine parameters are smoothed into
per-pixel fields and applied to the prior.
"""

from .baselines import affine_alignment_baseline, inpaint_baseline
from .core import DepthMap, PatchGrid, build_patch_grid, floor_to_multiple, resize_nearest
from .evalkit import SceneParams, compute_metrics, evaluate_regions, generate_scene, run_benchmark
from .graph import FactorWeights, SolveState, total_cost
from .pipeline import complete_depth
from .robust import HuberParams, huber_cost, huber_irls_weight
from .smooth import apply_affine_field, smooth_affine_params
from .solver import SolverConfig, global_affine_fit, irls_solve, solve_no_patch

__version__ = "0.1.0"

__all__ = [
    "DepthMap",
    "PatchGrid",
    "build_patch_grid",
    "floor_to_multiple",
    "resize_nearest",
    "HuberParams",
    "huber_cost",
    "huber_irls_weight",
    "FactorWeights",
    "SolveState",
    "total_cost",
    "SolverConfig",
    "global_affine_fit",
    "irls_solve",
    "solve_no_patch",
    "smooth_affine_params",
    "apply_affine_field",
    "affine_alignment_baseline",
    "inpaint_baseline",
    "complete_depth",
    "SceneParams",
    "generate_scene",
    "compute_metrics",
    "evaluate_regions",
    "run_benchmark",
]
