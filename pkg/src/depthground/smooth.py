"""Turn patch-wise affine parameters into smooth per-pixel fields.

Each pixel gets a normalized Gaussian-weighted average of all patch
parameters, weighted by distance to the patch centres. The fast path
convolves sparse "spike" maps placed at the centres and divides by the
convolution of the matching indicator map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DepthMap, PatchGrid, resize_nearest


@dataclass(frozen=True)
class AffineField:
    slope_field: np.ndarray
    bias_field: np.ndarray


def gaussian_weights(grid: PatchGrid, sigma: float) -> np.ndarray:
    """Direct per-pixel weights ``w[p, i]``, shape ``(H'*W', n)``, rows sum to 1.

    Reference implementation, O(pixels * patches) memory.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rr, cc = np.divmod(np.arange(grid.num_pixels), grid.width)
    d2 = (rr[:, None] - grid.centers[None, :, 0]) ** 2 + (cc[:, None] - grid.centers[None, :, 1]) ** 2
    logw = -d2 / (2.0 * sigma**2)
    # shift by the row max so far-away pixels do not underflow to 0/0
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


def smooth_affine_direct(grid: PatchGrid, slopes, biases, sigma: float) -> AffineField:
    w = gaussian_weights(grid, sigma)
    return AffineField(
        (w @ np.asarray(slopes, dtype=np.float64)).reshape(grid.shape),
        (w @ np.asarray(biases, dtype=np.float64)).reshape(grid.shape),
    )


def _axis_kernel(coords: int, centers: np.ndarray, sigma: float) -> np.ndarray:
    x = np.arange(coords)[:, None] - centers[None, :]
    return np.exp(-(x**2) / (2.0 * sigma**2))


def _gaussian_spread(values: np.ndarray, grid: PatchGrid, sigma: float) -> np.ndarray:
    # Convolution of a map holding `values` at the patch centres and 0
    # elsewhere. The centres lie on a rows x cols lattice and the kernel is
    # separable, so the convolution is K_rows @ V @ K_cols.T with no truncation.
    row_centers = grid.centers[:: grid.cols, 0]
    col_centers = grid.centers[: grid.cols, 1]
    kr = _axis_kernel(grid.height, row_centers, sigma)
    kc = _axis_kernel(grid.width, col_centers, sigma)
    return kr @ values.reshape(grid.rows, grid.cols) @ kc.T


def smooth_affine_params(grid: PatchGrid, slopes, biases, sigma: float) -> AffineField:
    """Per-pixel slope and bias fields from patch parameters via sparse Gaussian convolution."""
    slopes = np.asarray(slopes, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    if grid.n == 0 or len(slopes) == 0:
        raise ValueError("no patch parameters to smooth")
    if slopes.shape != (grid.n,) or biases.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} slopes and biases")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if grid.n == 1:
        return AffineField(np.full(grid.shape, slopes[0]), np.full(grid.shape, biases[0]))

    norm = _gaussian_spread(np.ones(grid.n), grid, sigma)
    if norm.min() <= 1e-300:
        # kernel underflows far from every centre (tiny sigma); use the log-stable sum
        return smooth_affine_direct(grid, slopes, biases, sigma)
    s = _gaussian_spread(slopes, grid, sigma) / norm
    b = _gaussian_spread(biases, grid, sigma) / norm
    # rounding can push a convex combination a hair outside its hull
    s = np.clip(s, slopes.min(), slopes.max())
    b = np.clip(b, biases.min(), biases.max())
    return AffineField(s, b)


def nearest_patch_field(grid: PatchGrid, slopes, biases) -> AffineField:
    """Piecewise-constant field: every pixel takes its own patch's parameters."""
    idx = grid.pixel_patch
    return AffineField(np.asarray(slopes)[idx], np.asarray(biases)[idx])


def apply_affine_field(mde: DepthMap, field: AffineField, depth_floor: float) -> DepthMap:
    if field.slope_field.shape != mde.shape or field.bias_field.shape != mde.shape:
        raise ValueError("affine field and mde dimensions differ")
    return DepthMap.dense(
        np.maximum(field.slope_field * mde.values + field.bias_field, depth_floor)
    )


def assemble_final(pred_resized: DepthMap, out_h: int, out_w: int) -> DepthMap:
    return resize_nearest(pred_resized, out_h, out_w)
