"""Reference methods: global affine alignment and harmonic hole filling."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .core import DepthMap
from .errors import InsufficientSupportError
from .solver import global_affine_fit

DEFAULT_DEPTH_FLOOR = 1e-4


def affine_alignment_baseline(
    sensor: DepthMap, mde: DepthMap, k: int = 64, seed: int = 0, depth_floor: float = DEFAULT_DEPTH_FLOOR
) -> DepthMap:
    """Map the whole prior through one affine fit on ``k`` random valid sensor pixels."""
    s, b = global_affine_fit(sensor, mde, k, seed)
    return DepthMap.dense(np.maximum(s * mde.values + b, depth_floor))


def _laplace_system(valid: np.ndarray, values: np.ndarray):
    h, w = valid.shape
    unknown = ~valid
    uid = -np.ones((h, w), dtype=np.int64)
    uid[unknown] = np.arange(int(unknown.sum()))
    n = int(unknown.sum())
    rows, cols, data = [], [], []
    rhs = np.zeros(n)
    degree = np.zeros(n)
    ur, uc = np.nonzero(unknown)
    me = uid[ur, uc]
    # Neumann border: only in-image neighbours enter the stencil
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nr, nc = ur + dr, uc + dc
        inside = (nr >= 0) & (nr < h) & (nc >= 0) & (nc < w)
        a, nr_, nc_ = me[inside], nr[inside], nc[inside]
        degree[a] += 1
        nb_unknown = unknown[nr_, nc_]
        rows.append(a[nb_unknown])
        cols.append(uid[nr_[nb_unknown], nc_[nb_unknown]])
        data.append(-np.ones(int(nb_unknown.sum())))
        np.add.at(rhs, a[~nb_unknown], values[nr_[~nb_unknown], nc_[~nb_unknown]])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    data.append(degree)
    A = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return A, rhs, (ur, uc)


def inpaint_baseline(sensor: DepthMap, tol: float = 1e-6) -> DepthMap:
    """Fill invalid pixels with the discrete harmonic interpolant of the valid ones.

    Valid pixels act as Dirichlet boundary values; the image border is a
    reflecting (Neumann) boundary. The sparse Laplace system is solved
    directly and its residual checked against ``tol``.
    """
    if sensor.valid_count == 0:
        raise InsufficientSupportError("nothing to inpaint from: no valid pixels")
    if sensor.valid.all():
        return sensor
    A, rhs, (ur, uc) = _laplace_system(sensor.valid, sensor.values)
    x = spsolve(A.tocsc(), rhs)
    resid = np.abs(A @ x - rhs).max()
    if resid >= tol:
        raise ArithmeticError(f"Laplace solve residual {resid:.3g} above {tol:g}")
    vmin = sensor.values[sensor.valid].min()
    vmax = sensor.values[sensor.valid].max()
    out = sensor.values.copy()
    # maximum principle holds exactly in theory; clip solver round-off
    out[ur, uc] = np.clip(x, vmin, vmax)
    return DepthMap.dense(out)
