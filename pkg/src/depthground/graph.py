"""Factor residuals, total cost and linearization of the depth factor graph.

The unknowns are a dense depth grid ``D`` (``H' x W'``) and one affine pair
``(s_i, b_i)`` per patch. Three factor families act on them:

* MDE alignment, one per pixel: ``D[p] - (s_i * mde[p] + b_i)``
* sensor consistency, one per pixel: ``D[p] - sensor[p]`` (zero if missing)
* log-slope consistency, one per 4-connected pair:
  ``(log D[p] - log D[q]) - (log mde[p] - log mde[q])``

Each family's Huber cost is scaled by its own positive weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import DepthMap, PatchGrid, neighbor_pairs
from .errors import ShapeError
from .robust import HuberParams, huber_cost, huber_irls_weight


@dataclass(frozen=True)
class FactorWeights:
    lambda_mde: float = 2.5
    lambda_sen: float = 0.5
    lambda_slp: float = 1.0

    def __post_init__(self):
        if min(self.lambda_mde, self.lambda_sen, self.lambda_slp) < 0:
            raise ValueError("factor weights must be non-negative")


@dataclass
class SolveState:
    """Optimization unknowns: ``depth`` is ``(H', W')``, ``slope``/``bias`` are ``(n,)``."""

    depth: np.ndarray
    slope: np.ndarray
    bias: np.ndarray

    def copy(self) -> SolveState:
        return SolveState(self.depth.copy(), self.slope.copy(), self.bias.copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.depth.ravel(), self.slope, self.bias])

    @classmethod
    def unpack(cls, x: np.ndarray, shape: tuple[int, int], n: int) -> SolveState:
        npx = shape[0] * shape[1]
        return cls(
            x[:npx].reshape(shape).copy(), x[npx : npx + n].copy(), x[npx + n :].copy()
        )


@dataclass(frozen=True)
class FactorSet:
    """Index arrays describing every factor of the graph.

    Factors reference pixels by flat row-major index and never copy data.
    """

    shape: tuple[int, int]
    mde_pixel: np.ndarray
    mde_patch: np.ndarray
    sensor_pixel: np.ndarray
    sensor_valid: np.ndarray
    slope_p: np.ndarray
    slope_q: np.ndarray

    @property
    def num_mde(self) -> int:
        return len(self.mde_pixel)

    @property
    def num_sensor(self) -> int:
        return len(self.sensor_pixel)

    @property
    def num_slope(self) -> int:
        return len(self.slope_p)


def mde_residual(d_p, s_i, b_i, m_p):
    return d_p - (s_i * m_p + b_i)


def sensor_residual(d_p, s_p):
    """``d_p - s_p``, or exactly 0 when the measurement ``s_p`` is missing (None/NaN)."""
    if s_p is None or not np.isfinite(s_p):
        return 0.0
    return d_p - s_p


def slope_residual(d_p, d_q, m_p, m_q):
    if np.any(np.asarray([d_p, d_q, m_p, m_q]) <= 0):
        raise ValueError("log of non-positive depth")
    return (math.log(d_p) - math.log(d_q)) - (math.log(m_p) - math.log(m_q))


def build_factors(grid: PatchGrid, sensor: DepthMap) -> FactorSet:
    if sensor.shape != grid.shape:
        raise ShapeError(f"sensor shape {sensor.shape} != grid shape {grid.shape}")
    pixels = np.arange(grid.num_pixels)
    p, q = neighbor_pairs(grid.height, grid.width)
    return FactorSet(
        shape=grid.shape,
        mde_pixel=pixels,
        mde_patch=grid.pixel_patch.ravel(),
        sensor_pixel=pixels.copy(),
        sensor_valid=sensor.valid.ravel().copy(),
        slope_p=p,
        slope_q=q,
    )


def _check_shapes(state: SolveState, sensor: DepthMap, mde: DepthMap, grid: PatchGrid):
    if not (state.depth.shape == sensor.shape == mde.shape == grid.shape):
        raise ShapeError(
            f"dimension mismatch: depth {state.depth.shape}, sensor {sensor.shape}, "
            f"mde {mde.shape}, grid {grid.shape}"
        )
    if state.slope.shape != (grid.n,) or state.bias.shape != (grid.n,):
        raise ShapeError(f"expected {grid.n} affine parameters per kind")


def factor_residuals(
    state: SolveState, factors: FactorSet, sensor: DepthMap, mde: DepthMap
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised residuals ``(mde, sensor, slope)`` for every factor.

    Sensor residuals of missing measurements are 0.
    """
    d = state.depth.ravel()
    m = mde.values.ravel()
    patch = factors.mde_patch
    r_mde = d[factors.mde_pixel] - (state.slope[patch] * m[factors.mde_pixel] + state.bias[patch])

    sp_ = factors.sensor_pixel
    r_sen = np.where(factors.sensor_valid, d[sp_] - sensor.values.ravel()[sp_], 0.0)

    if np.any(d <= 0) or np.any(m <= 0):
        raise ValueError("log of non-positive depth")
    logd = np.log(d)
    logm = np.log(m)
    p, q = factors.slope_p, factors.slope_q
    r_slp = (logd[p] - logd[q]) - (logm[p] - logm[q])
    return r_mde, r_sen, r_slp


def factor_costs(
    state: SolveState,
    factors: FactorSet,
    sensor: DepthMap,
    mde: DepthMap,
    weights: FactorWeights,
    huber: HuberParams,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted robust cost of each factor, per family."""
    r_mde, r_sen, r_slp = factor_residuals(state, factors, sensor, mde)
    return (
        weights.lambda_mde * huber_cost(r_mde, huber.delta1),
        weights.lambda_sen * huber_cost(r_sen, huber.delta1),
        weights.lambda_slp * huber_cost(r_slp, huber.delta2),
    )


def total_cost(
    state: SolveState,
    sensor: DepthMap,
    mde: DepthMap,
    grid: PatchGrid,
    weights: FactorWeights,
    huber: HuberParams,
    factors: FactorSet | None = None,
) -> float:
    """Sum of all weighted factor costs (exactly rounded, so order-independent)."""
    _check_shapes(state, sensor, mde, grid)
    if factors is None:
        factors = build_factors(grid, sensor)
    costs = factor_costs(state, factors, sensor, mde, weights, huber)
    return math.fsum(np.concatenate(costs).tolist())


@dataclass
class Linearization:
    """Residuals ``r``, sparse Jacobian ``J`` and IRLS weights ``w`` of all active factors.

    Rows are ordered MDE, valid sensor, slope. Columns are the packed
    unknowns ``[depth.ravel(), slope, bias]``.
    """

    residual: np.ndarray
    jacobian: sp.csr_matrix
    weight: np.ndarray

    def gradient(self) -> np.ndarray:
        """Gradient of the IRLS majorizer at the linearization point, ``J^T W r``."""
        return self.jacobian.T @ (self.weight * self.residual)


def linearize(
    state: SolveState,
    factors: FactorSet,
    sensor: DepthMap,
    mde: DepthMap,
    n_patches: int,
    weights: FactorWeights,
    huber: HuberParams,
) -> Linearization:
    d = state.depth.ravel()
    npx = d.size
    m = mde.values.ravel()
    r_mde, r_sen, r_slp = factor_residuals(state, factors, sensor, mde)

    k = factors.num_mde
    pix = factors.mde_pixel
    patch = factors.mde_patch
    rows_mde = np.repeat(np.arange(k), 3)
    cols_mde = np.stack([pix, npx + patch, npx + n_patches + patch], axis=1).ravel()
    vals_mde = np.stack([np.ones(k), -m[pix], -np.ones(k)], axis=1).ravel()

    valid = factors.sensor_valid
    sen_pix = factors.sensor_pixel[valid]
    ks = len(sen_pix)
    rows_sen = k + np.arange(ks)
    vals_sen = np.ones(ks)

    p, q = factors.slope_p, factors.slope_q
    kl = len(p)
    rows_slp = np.repeat(k + ks + np.arange(kl), 2)
    cols_slp = np.stack([p, q], axis=1).ravel()
    vals_slp = np.stack([1.0 / d[p], -1.0 / d[q]], axis=1).ravel()

    jac = sp.csr_matrix(
        (
            np.concatenate([vals_mde, vals_sen, vals_slp]),
            (
                np.concatenate([rows_mde, rows_sen, rows_slp]),
                np.concatenate([cols_mde, sen_pix, cols_slp]),
            ),
        ),
        shape=(k + ks + kl, npx + 2 * n_patches),
    )
    r_sen = r_sen[valid]
    weight = np.concatenate(
        [
            weights.lambda_mde * huber_irls_weight(r_mde, huber.delta1),
            weights.lambda_sen * huber_irls_weight(r_sen, huber.delta1),
            weights.lambda_slp * huber_irls_weight(r_slp, huber.delta2),
        ]
    )
    return Linearization(np.concatenate([r_mde, r_sen, r_slp]), jac, weight)


def residual_energy(
    state: SolveState,
    sensor: DepthMap,
    mde: DepthMap,
    grid: PatchGrid,
    weights: FactorWeights,
    huber: HuberParams,
) -> np.ndarray:
    """Unnormalised per-pixel uncertainty: weighted sensor plus MDE robust cost."""
    _check_shapes(state, sensor, mde, grid)
    factors = build_factors(grid, sensor)
    c_mde, c_sen, _ = factor_costs(state, factors, sensor, mde, weights, huber)
    return (c_sen + c_mde).reshape(grid.shape)


def residual_uncertainty(
    state: SolveState,
    sensor: DepthMap,
    mde: DepthMap,
    grid: PatchGrid,
    weights: FactorWeights,
    huber: HuberParams,
    normalizer: float | None = None,
) -> np.ndarray:
    """Per-pixel residual map scaled into ``[0, 1]``.

    ``normalizer=None`` divides by the per-image maximum; pass a dataset-wide
    maximum (e.g. from :func:`residual_energy` over all frames) to compare
    frames on one scale. An all-zero map is returned unchanged.
    """
    energy = residual_energy(state, sensor, mde, grid, weights, huber)
    if normalizer is None:
        normalizer = float(energy.max())
    elif normalizer <= 0:
        raise ValueError("normalizer must be positive")
    if normalizer == 0:
        normalizer = 1.0
    return energy / normalizer
