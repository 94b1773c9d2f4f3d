"""Initialization and robust IRLS minimization of the factor-graph cost."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .core import DepthMap, PatchGrid, single_patch_grid
from .errors import ConfigError, DivergenceError, InsufficientSupportError, ShapeError
from .graph import (
    FactorSet,
    FactorWeights,
    SolveState,
    build_factors,
    linearize,
    total_cost,
)
from .robust import HuberParams

log = logging.getLogger(__name__)

MAX_DAMPING_RETRIES = 8
# damping used when a step is rejected while damping is exactly zero
MIN_RETRY_DAMPING = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    """Every knob of the solver. Defaults are the published settings where one exists."""

    patch_size: int = 64
    weights: FactorWeights = field(default_factory=FactorWeights)
    huber: HuberParams = field(default_factory=HuberParams)
    k: int = 64
    seed: int = 0
    max_iterations: int = 100
    rel_tol: float = 1e-6
    depth_floor: float = 1e-4
    cg_max_iterations: int = 500
    cg_tol: float = 1e-8
    damping_init: float = 1e-3
    # a cost this small is round-off of an exact fit; stop instead of chasing it
    abs_tol: float = 1e-24

    def __post_init__(self):
        if self.patch_size < 1:
            raise ConfigError("patch_size must be >= 1")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be > 0")
        if not self.depth_floor > 0:
            raise ConfigError("depth_floor must be > 0")
        if self.max_iterations < 1 or self.cg_max_iterations < 1:
            raise ConfigError("iteration limits must be >= 1")
        if not self.cg_tol > 0 or self.damping_init < 0 or self.abs_tol < 0:
            raise ConfigError("cg_tol must be > 0, damping_init and abs_tol >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def with_weights(self, **kw) -> SolverConfig:
        return replace(self, weights=replace(self.weights, **kw))


@dataclass
class SolveStats:
    iterations: int
    initial_cost: float
    final_cost: float
    cost_trace: list[float]
    converged: bool
    degenerate_init: bool = False
    rejected_steps: int = 0

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "converged": self.converged,
            "degenerate_init": self.degenerate_init,
            "rejected_steps": self.rejected_steps,
            "cost_trace": list(self.cost_trace),
        }


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the stream is fixed for a given seed on every platform."""
    return np.random.Generator(np.random.PCG64(seed))


def fit_affine_sample(x: np.ndarray, y: np.ndarray) -> tuple[float, float, bool]:
    """Ordinary least squares ``y ~ s x + b``.

    Returns ``(s, b, degenerate)``; if all ``x`` are equal the slope is fixed
    to 1 and ``b = mean(y - x)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.ptp(x) == 0:
        return 1.0, float(np.mean(y - x)), True
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    s = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    return s, float(ym - s * xm), False


def sample_valid_pixels(valid: np.ndarray, k: int, seed: int) -> np.ndarray:
    idx = np.flatnonzero(valid)
    if len(idx) < 2:
        raise InsufficientSupportError(
            f"insufficient sensor support: {len(idx)} valid pixel(s), need at least 2"
        )
    return make_rng(seed).choice(idx, size=min(k, len(idx)), replace=False)


def global_affine_fit(
    sensor: DepthMap, mde: DepthMap, k: int, seed: int
) -> tuple[float, float]:
    """Least-squares ``sensor ~ s * mde + b`` on ``k`` randomly drawn valid pixels."""
    s, b, _ = _global_affine_fit(sensor, mde, k, seed)
    return s, b


def _global_affine_fit(sensor, mde, k, seed):
    if sensor.shape != mde.shape:
        raise ShapeError(f"sensor shape {sensor.shape} != mde shape {mde.shape}")
    pick = sample_valid_pixels(sensor.valid, k, seed)
    s, b, degenerate = fit_affine_sample(mde.values.ravel()[pick], sensor.values.ravel()[pick])
    if degenerate:
        log.warning("degenerate affine sample (constant prior); using slope 1")
    return s, b, degenerate


def initialize(
    sensor: DepthMap, mde: DepthMap, grid: PatchGrid, config: SolverConfig
) -> SolveState:
    state, _ = _initialize(sensor, mde, grid, config)
    return state


def _initialize(sensor, mde, grid, config):
    if not (sensor.shape == mde.shape == grid.shape):
        raise ShapeError("sensor, mde and grid must share dimensions")
    s0, b0, degenerate = _global_affine_fit(sensor, mde, config.k, config.seed)
    depth = np.maximum(s0 * mde.values + b0, config.depth_floor)
    state = SolveState(depth, np.full(grid.n, s0), np.full(grid.n, b0))
    return state, degenerate


def jacobi_pcg(
    A: sp.csr_matrix, rhs: np.ndarray, tol: float, max_iterations: int
) -> tuple[np.ndarray, int, bool]:
    """Conjugate gradients on SPD ``A`` with diagonal preconditioning, from ``x = 0``.

    Stops when ``||r|| <= tol * ||rhs||``. Returns ``(x, iterations, converged)``.
    """
    diag = A.diagonal()
    inv = np.divide(1.0, diag, out=np.ones_like(diag), where=diag > 0)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return x, 0, True
    z = inv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iterations + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            return x, it, False
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it, True
        z = inv * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, max_iterations, False


def irls_solve(
    state: SolveState,
    factors: FactorSet,
    sensor: DepthMap,
    mde: DepthMap,
    grid: PatchGrid,
    config: SolverConfig,
) -> tuple[SolveState, SolveStats]:
    """Minimize the total cost by damped, reweighted Gauss-Newton steps.

    Each outer iteration refreshes the Huber weights, linearizes the
    log-slope residuals around the current depth, solves the damped normal
    equations with Jacobi-preconditioned CG and keeps the step only if the
    true robust cost does not increase.
    """
    w, hub = config.weights, config.huber
    n = grid.n

    def cost_of(st):
        c = total_cost(st, sensor, mde, grid, w, hub, factors)
        if not math.isfinite(c):
            raise DivergenceError("non-finite cost")
        return c

    state = state.copy()
    cost = cost_of(state)
    trace = [cost]
    damping = config.damping_init
    converged = False
    rejected = 0
    iterations = 0

    for _ in range(config.max_iterations):
        if cost <= config.abs_tol:
            converged = True
            break
        lin = linearize(state, factors, sensor, mde, n, w, hub)
        J = lin.jacobian
        JtW = J.T.multiply(lin.weight).tocsr()
        H = (JtW @ J).tocsr()
        g = JtW @ lin.residual
        eye = sp.identity(H.shape[0], format="csr")
        x0 = state.pack()

        accepted = None
        for _retry in range(MAX_DAMPING_RETRIES + 1):
            step, cg_its, cg_ok = jacobi_pcg(
                (H + damping * eye).tocsr(), -g, config.cg_tol, config.cg_max_iterations
            )
            if not cg_ok:
                log.debug("CG stopped after %d iterations above tolerance", cg_its)
            cand = SolveState.unpack(x0 + step, grid.shape, n)
            np.maximum(cand.depth, config.depth_floor, out=cand.depth)
            new_cost = cost_of(cand)
            if new_cost <= cost:
                accepted = (cand, new_cost)
                break
            rejected += 1
            damping = max(damping * 10.0, MIN_RETRY_DAMPING)

        if accepted is None:
            # no damping level yields descent: treat as a stationary point
            converged = True
            break
        iterations += 1
        state, new_cost = accepted
        rel = (cost - new_cost) / cost
        cost = new_cost
        trace.append(cost)
        damping *= 0.5
        if rel < config.rel_tol:
            converged = True
            break

    stats = SolveStats(
        iterations=iterations,
        initial_cost=trace[0],
        final_cost=cost,
        cost_trace=trace,
        converged=converged,
        rejected_steps=rejected,
    )
    return state, stats


def solve(
    sensor: DepthMap, mde: DepthMap, grid: PatchGrid, config: SolverConfig
) -> tuple[SolveState, SolveStats]:
    """Initialize then run IRLS on an already-resized problem."""
    state, degenerate = _initialize(sensor, mde, grid, config)
    factors = build_factors(grid, sensor)
    state, stats = irls_solve(state, factors, sensor, mde, grid, config)
    stats.degenerate_init = degenerate
    return state, stats


def solve_no_patch(
    sensor: DepthMap, mde: DepthMap, config: SolverConfig
) -> tuple[SolveState, SolveStats]:
    """Same optimization with a single affine pair shared by the whole image."""
    return solve(sensor, mde, single_patch_grid(*sensor.shape), config)
