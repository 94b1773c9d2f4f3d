"""End-to-end depth completion: resize, solve, smooth, resize back."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DepthMap,
    PatchGrid,
    build_patch_grid,
    floor_to_multiple,
    resize_nearest,
    single_patch_grid,
)
from .errors import ConfigError, ShapeError
from .graph import SolveState, residual_energy
from .smooth import apply_affine_field, assemble_final, smooth_affine_params
from .solver import SolverConfig, SolveStats, solve

METHODS = ("anchord", "no-patch", "no-smooth", "affine", "inpaint")


@dataclass
class Completion:
    """Result of one completion run.

    ``depth`` is at input resolution. Solver-based methods also expose the
    resized problem (``grid``, ``sensor_r``, ``mde_r``), the optimum
    ``state`` and solver ``stats``; baselines leave these as ``None``.
    """

    depth: DepthMap
    method: str
    grid: PatchGrid | None = None
    sensor_r: DepthMap | None = None
    mde_r: DepthMap | None = None
    state: SolveState | None = None
    stats: SolveStats | None = None

    def residual_energy(self, config: SolverConfig) -> np.ndarray:
        if self.state is None:
            raise ValueError(f"method {self.method!r} has no factor-graph state")
        return residual_energy(
            self.state, self.sensor_r, self.mde_r, self.grid, config.weights, config.huber
        )


def resized_domain(height: int, width: int, m: int) -> tuple[int, int]:
    return floor_to_multiple(height, m), floor_to_multiple(width, m)


def complete_depth(
    sensor: DepthMap, mde: DepthMap, config: SolverConfig, method: str = "anchord"
) -> Completion:
    """Dense metric depth from a sparse sensor map and a monocular prior.

    ``method`` is one of ``anchord`` (full pipeline), ``no-patch`` (single
    affine pair, raw optimized depth), ``no-smooth`` (patch grid, raw
    optimized depth), ``affine`` or ``inpaint`` (baselines).
    """
    # local import: baselines depend on the solver module
    from .baselines import affine_alignment_baseline, inpaint_baseline

    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if sensor.shape != mde.shape:
        raise ShapeError(f"sensor shape {sensor.shape} != mde shape {mde.shape}")
    if not mde.valid.all():
        raise ValueError("monocular prior must be dense and positive")

    if method == "affine":
        return Completion(
            affine_alignment_baseline(sensor, mde, config.k, config.seed, config.depth_floor), method
        )
    if method == "inpaint":
        return Completion(inpaint_baseline(sensor), method)

    h, w = sensor.shape
    hp, wp = resized_domain(h, w, config.patch_size)
    sensor_r = resize_nearest(sensor, hp, wp)
    mde_r = resize_nearest(mde, hp, wp)
    grid = single_patch_grid(hp, wp) if method == "no-patch" else build_patch_grid(hp, wp, config.patch_size)
    state, stats = solve(sensor_r, mde_r, grid, config)

    if method == "anchord":
        field = smooth_affine_params(grid, state.slope, state.bias, sigma=float(config.patch_size))
        pred_r = apply_affine_field(mde_r, field, config.depth_floor)
    else:
        pred_r = DepthMap.dense(state.depth)
    return Completion(
        assemble_final(pred_r, h, w), method, grid, sensor_r, mde_r, state, stats
    )
