"""Metrics, region-masked evaluation, synthetic scenes and the benchmark runner."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import DepthMap
from .errors import DepthGroundError, EmptyRegionError, ShapeError
from .solver import SolverConfig, make_rng

log = logging.getLogger(__name__)

REGIONS = ("objects", "background", "full")
METRICS = ("mae", "rmse", "rel")
BENCH_METHODS = ("anchord", "anchord-no-patch", "anchord-no-smooth", "affine-baseline", "inpaint-baseline")


# --------------------------------------------------------------------------- metrics


def compute_metrics(
    pred: DepthMap, gt: DepthMap, mask=None, invalid_pred: str = "skip"
) -> tuple[float, float, float, int]:
    """MAE, RMSE and REL over ``mask & gt.valid``; also returns the pixel count.

    Pixels where ``pred`` is invalid are skipped (``invalid_pred="skip"``) or
    scored as predicting 0 (``"penalize"``).
    """
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction shape {pred.shape} != ground truth shape {gt.shape}")
    sel = gt.valid.copy()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != gt.shape:
            raise ShapeError(f"mask shape {mask.shape} != ground truth shape {gt.shape}")
        sel &= mask
    if invalid_pred == "skip":
        sel &= pred.valid
    elif invalid_pred != "penalize":
        raise ValueError("invalid_pred must be 'skip' or 'penalize'")
    if not sel.any():
        raise EmptyRegionError("empty region")
    g = gt.values[sel]
    err = np.abs(pred.values[sel] - g)
    mae = float(err.mean())
    rmse = float(np.sqrt(np.mean(err**2)))
    rel = float(np.mean(err / g))
    return mae, rmse, rel, int(sel.sum())


@dataclass
class RegionMetrics:
    mae: float
    rmse: float
    rel: float
    pixel_count: int


@dataclass
class RegionReport:
    """Metrics per region; a region with no pixels is ``None``."""

    objects: RegionMetrics | None
    background: RegionMetrics | None
    full: RegionMetrics | None

    def region(self, name: str) -> RegionMetrics | None:
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {r: (asdict(m) if (m := self.region(r)) is not None else None) for r in REGIONS}

    def render(self) -> str:
        lines = [f"{'region':<12}{'MAE':>10}{'RMSE':>10}{'REL':>10}{'pixels':>10}"]
        for r in REGIONS:
            m = self.region(r)
            if m is None:
                lines.append(f"{r:<12}{'absent':>10}")
            else:
                lines.append(f"{r:<12}{m.mae:>10.4f}{m.rmse:>10.4f}{m.rel:>10.4f}{m.pixel_count:>10d}")
        return "\n".join(lines)


def evaluate_regions(pred: DepthMap, gt: DepthMap, object_mask=None) -> RegionReport:
    """Objects = mask & valid gt, background = ~mask & valid gt, full = valid gt.

    Without a mask only the full region is evaluated.
    """
    masks = {"full": None}
    if object_mask is not None:
        object_mask = np.asarray(object_mask, dtype=bool)
        masks["objects"] = object_mask
        masks["background"] = ~object_mask
    out = {}
    for name in REGIONS:
        if name not in masks:
            out[name] = None
            continue
        try:
            out[name] = RegionMetrics(*compute_metrics(pred, gt, masks[name]))
        except EmptyRegionError:
            out[name] = None
    return RegionReport(**out)


# --------------------------------------------------------------------------- synthetic scenes


@dataclass(frozen=True)
class SceneParams:
    """Knobs of the synthetic scene generator.

    The prior is ``alpha * gt + beta`` with one ``(alpha, beta)`` for the
    background and a jittered pair per object (``distortion="piecewise"``),
    plus smooth low-frequency scale and bias fields and white noise.
    ``distortion="global"`` uses the background pair everywhere with no
    spatial fields.
    """

    height: int = 240
    width: int = 320
    depth_min: float = 0.4
    depth_max: float = 1.7
    n_objects: tuple[int, int] = (3, 8)
    object_size: tuple[float, float] = (0.15, 0.35)
    object_lift: tuple[float, float] = (0.05, 0.30)
    distortion: str = "piecewise"
    alpha: tuple[float, float] = (0.6, 1.4)
    beta: tuple[float, float] = (-0.1, 0.3)
    object_alpha_jitter: float = 0.04
    object_beta_jitter: float = 0.01
    scale_field_amplitude: float = 0.06
    bias_field_amplitude: float = 0.02
    mde_noise: float = 0.002
    sensor_noise: float = 0.002
    hole_fraction: float = 0.5
    corruption_fraction: float = 0.25
    corruption_bias: tuple[float, float] = (0.03, 0.15)
    background_dropout: float = 0.01

    def __post_init__(self):
        if self.distortion not in ("piecewise", "global"):
            raise ValueError("distortion must be 'piecewise' or 'global'")
        if not 0 <= self.hole_fraction <= 1 or not 0 <= self.corruption_fraction <= 1:
            raise ValueError("fractions must lie in [0, 1]")
        if self.hole_fraction + self.corruption_fraction > 1:
            raise ValueError("hole_fraction + corruption_fraction must not exceed 1")

    @classmethod
    def clean(cls, **kw) -> SceneParams:
        """No distortion beyond one global affine map, no noise, no holes."""
        base = dict(
            distortion="global", scale_field_amplitude=0.0, bias_field_amplitude=0.0, mde_noise=0.0, sensor_noise=0.0,
            hole_fraction=0.0, corruption_fraction=0.0, background_dropout=0.0,
        )
        base.update(kw)
        return cls(**base)


@dataclass(eq=False)
class SyntheticScene:
    gt: DepthMap
    sensor: DepthMap
    mde: DepthMap
    object_mask: np.ndarray
    seed: int
    params: SceneParams
    affine: dict = field(default_factory=dict)

    @property
    def stem(self) -> str:
        return f"scene{self.seed:06d}"


def _smooth_noise(rng, shape, sigma):
    return gaussian_filter(rng.standard_normal(shape), sigma, mode="reflect")


def _low_frequency_field(rng, u, v):
    """Sum of two random plane waves of at most half a cycle per image, scaled to [-1, 1]."""
    out = np.zeros_like(u)
    for _ in range(2):
        fu, fv = rng.uniform(0.1, 0.5, size=2) * rng.choice([-1.0, 1.0], size=2)
        out += np.cos(2 * np.pi * (fu * u + fv * v) + rng.uniform(0, 2 * np.pi))
    return out / 2.0


def _rank_within(field_: np.ndarray, sel: np.ndarray) -> np.ndarray:
    """Rank of each selected pixel's field value in [0, 1), stable on ties."""
    ranks = np.full(field_.shape, np.inf)
    vals = field_[sel]
    order = np.argsort(vals, kind="stable")
    r = np.empty(len(vals))
    r[order] = np.arange(len(vals)) / max(len(vals), 1)
    ranks[sel] = r
    return ranks


def generate_scene(seed: int, params: SceneParams | None = None) -> SyntheticScene:
    """Deterministic desk-scale scene: tilted table plane with raised objects.

    Sensor failures (holes and biased readings) are confined to the object
    mask and grow as contiguous blobs, mimicking transparent or specular
    surfaces. Background pixels see only white noise and sparse dropout.
    """
    p = params or SceneParams()
    rng = make_rng(seed)
    H, W = p.height, p.width
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    u, v = xx / max(W - 1, 1), yy / max(H - 1, 1)

    far = rng.uniform(p.depth_max - 0.3, p.depth_max - 0.1)
    tilt = rng.uniform(0.2, 0.5)
    side = rng.uniform(-0.1, 0.1)
    # far at the top of the image, nearer toward the bottom edge
    gt = far - tilt * v + side * (u - 0.5)

    mask = np.zeros((H, W), dtype=bool)
    labels = np.zeros((H, W), dtype=np.int32)
    n_obj = int(rng.integers(p.n_objects[0], p.n_objects[1] + 1))
    for j in range(1, n_obj + 1):
        oh = rng.uniform(*p.object_size) * H
        ow = rng.uniform(*p.object_size) * W
        cy = rng.uniform(oh / 2, H - oh / 2)
        cx = rng.uniform(ow / 2, W - ow / 2)
        if rng.random() < 0.5:
            shape = (np.abs(yy - cy) <= oh / 2) & (np.abs(xx - cx) <= ow / 2)
        else:
            shape = ((yy - cy) / (oh / 2)) ** 2 + ((xx - cx) / (ow / 2)) ** 2 <= 1.0
        lift = rng.uniform(*p.object_lift)
        ty, tx = rng.uniform(-0.1, 0.1, size=2)
        top = gt - lift + ty * (yy - cy) / H + tx * (xx - cx) / W
        gt = np.where(shape, top, gt)
        mask |= shape
        labels[shape] = j
    gt = np.clip(gt, p.depth_min, p.depth_max)

    a0 = rng.uniform(*p.alpha)
    b0 = rng.uniform(*p.beta)
    alpha = np.full((H, W), a0)
    beta = np.full((H, W), b0)
    pairs = {"background": (float(a0), float(b0))}
    for j in range(1, n_obj + 1):
        aj = a0 * (1 + rng.uniform(-p.object_alpha_jitter, p.object_alpha_jitter))
        bj = b0 + rng.uniform(-p.object_beta_jitter, p.object_beta_jitter)
        if p.distortion == "piecewise":
            alpha[labels == j] = aj
            beta[labels == j] = bj
            pairs[f"object{j}"] = (float(aj), float(bj))
    if p.distortion == "piecewise":
        alpha = alpha * (1.0 + p.scale_field_amplitude * _low_frequency_field(rng, u, v))
        beta = beta + p.bias_field_amplitude * a0 * _low_frequency_field(rng, u, v)
    mde = alpha * gt + beta
    if p.mde_noise > 0:
        mde = mde + rng.normal(0.0, p.mde_noise, size=(H, W))
    mde = np.maximum(mde, 0.05)

    sensor = gt.copy()
    if p.sensor_noise > 0:
        sensor = sensor + rng.normal(0.0, p.sensor_noise, size=(H, W))
    valid = np.ones((H, W), dtype=bool)
    blob = _smooth_noise(rng, (H, W), sigma=6.0)
    for j in range(1, n_obj + 1):
        sel = labels == j
        if not sel.any():
            continue
        rank = _rank_within(blob, sel)
        holes = rank < p.hole_fraction
        corrupt = (rank >= p.hole_fraction) & (rank < p.hole_fraction + p.corruption_fraction)
        valid &= ~holes
        sensor = np.where(corrupt, sensor + rng.uniform(*p.corruption_bias), sensor)
    if p.background_dropout > 0:
        valid &= ~(~mask & (rng.random((H, W)) < p.background_dropout))
    sensor = np.maximum(sensor, 1e-3)

    return SyntheticScene(
        gt=DepthMap.dense(gt),
        sensor=DepthMap(sensor, valid),
        mde=DepthMap.dense(mde),
        object_mask=mask,
        seed=seed,
        params=p,
        affine=pairs,
    )


def default_suite(n: int = 20, first_seed: int = 0, params: SceneParams | None = None) -> list[SyntheticScene]:
    return [generate_scene(first_seed + i, params) for i in range(n)]


# --------------------------------------------------------------------------- benchmark


@dataclass(eq=False)
class Frame:
    """One evaluation sample. ``mask`` may be ``None`` (full region only)."""

    stem: str
    sensor: DepthMap
    mde: DepthMap
    gt: DepthMap
    mask: np.ndarray | None = None

    @classmethod
    def from_scene(cls, scene: SyntheticScene) -> Frame:
        return cls(scene.stem, scene.sensor, scene.mde, scene.gt, scene.object_mask)


@dataclass(frozen=True)
class ExternalMethod:
    """Precomputed predictions looked up per frame stem by ``loader(stem)``."""

    name: str
    loader: Callable[[str], DepthMap]


_PIPELINE_METHOD = {
    "anchord": "anchord",
    "anchord-no-patch": "no-patch",
    "anchord-no-smooth": "no-smooth",
    "affine-baseline": "affine",
    "inpaint-baseline": "inpaint",
}


def _method_name(method) -> str:
    return method.name if isinstance(method, ExternalMethod) else method


def _run_frame(frame: Frame, methods: Sequence, config: SolverConfig, keep: bool = False):
    from .pipeline import complete_depth

    rows = {}
    preds = {}
    for method in methods:
        name = _method_name(method)
        try:
            if isinstance(method, ExternalMethod):
                pred = method.loader(frame.stem)
                stats = None
            else:
                c = complete_depth(frame.sensor, frame.mde, config, _PIPELINE_METHOD[method])
                pred, stats = c.depth, c.stats
            report = evaluate_regions(pred, frame.gt, frame.mask)
            if keep:
                preds[name] = pred
            rows[name] = {"report": report.as_dict(), "stats": stats.as_dict() if stats else None}
        except (DepthGroundError, ValueError, ArithmeticError, OSError, KeyError) as exc:
            rows[name] = {"error": f"{type(exc).__name__}: {exc}"}
    return rows, preds


@dataclass
class BenchmarkReport:
    """Per-frame results plus region metrics averaged over frames."""

    methods: list[str]
    frames: list[str]
    per_frame: dict
    summary: dict
    notes: list[str] = field(default_factory=list)
    elapsed: float = 0.0
    predictions: dict = field(default_factory=dict, repr=False)

    def metric(self, method: str, region: str, metric: str) -> float | None:
        cell = self.summary[method].get(region)
        return None if cell is None else cell[metric]

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "methods": self.methods,
            "frames": self.frames,
            "summary": self.summary,
            "per_frame": self.per_frame,
            "notes": self.notes,
        }
        if include_timing:
            d["elapsed_seconds"] = self.elapsed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table_rows(self) -> list[list[str]]:
        rows = []
        for m in self.methods:
            row = [m]
            for r in REGIONS:
                for k in METRICS:
                    v = self.metric(m, r, k)
                    row.append("-" if v is None else f"{v:.4f}")
            rows.append(row)
        return rows

    def render_table(self) -> str:
        head1 = f"{'method':<22}" + "".join(f"{r:^30}" for r in REGIONS)
        head2 = f"{'':<22}" + "".join(f"{k.upper():>10}" for _ in REGIONS for k in METRICS)
        lines = [head1, head2, "-" * len(head2)]
        for row in self.table_rows():
            lines.append(f"{row[0]:<22}" + "".join(f"{c:>10}" for c in row[1:]))
        return "\n".join(lines)

    def to_text(self) -> str:
        """Line-oriented ``key = value`` block followed by the rendered table."""
        lines = [f"frames = {len(self.frames)}", f"methods = {','.join(self.methods)}"]
        for m in self.methods:
            failures = sum(1 for f in self.frames if "error" in self.per_frame[f][m])
            lines.append(f"{m}.failures = {failures}")
            for r in REGIONS:
                for k in METRICS:
                    v = self.metric(m, r, k)
                    lines.append(f"{m}.{r}.{k} = {'absent' if v is None else repr(v)}")
        for note in self.notes:
            lines.append(f"note = {note}")
        return "\n".join(lines) + "\n\n" + self.render_table() + "\n"


def _aggregate(methods: list[str], frames: list[str], per_frame: dict) -> dict:
    summary = {}
    for m in methods:
        summary[m] = {}
        for r in REGIONS:
            cells = [
                per_frame[f][m]["report"][r]
                for f in frames
                if "report" in per_frame[f][m] and per_frame[f][m]["report"][r] is not None
            ]
            if not cells:
                summary[m][r] = None
                continue
            summary[m][r] = {k: math.fsum(c[k] for c in cells) / len(cells) for k in METRICS}
            summary[m][r]["frames"] = len(cells)
            summary[m][r]["pixel_count"] = sum(c["pixel_count"] for c in cells)
    return summary


def run_benchmark(
    frames: Sequence,
    methods: Sequence = BENCH_METHODS,
    config: SolverConfig | None = None,
    workers: int = 1,
    keep_predictions: bool = False,
) -> BenchmarkReport:
    """Run every method on every frame and average region metrics over frames.

    ``frames`` may hold :class:`Frame` or :class:`SyntheticScene` objects;
    ``methods`` holds names from :data:`BENCH_METHODS` or
    :class:`ExternalMethod` instances. Failures are recorded per frame and do
    not abort the run. Aggregation is sorted by frame stem, so the report
    does not depend on ``workers``. With ``keep_predictions`` the predicted
    depth maps are kept in ``report.predictions[stem][method]``.
    """
    if not frames:
        raise ValueError("benchmark needs at least one frame")
    config = config or SolverConfig()
    frames = [Frame.from_scene(f) if isinstance(f, SyntheticScene) else f for f in frames]
    for m in methods:
        if not isinstance(m, ExternalMethod) and m not in _PIPELINE_METHOD:
            raise ValueError(f"unknown benchmark method {m!r}")
    names = [_method_name(m) for m in methods]
    stems_in = [f.stem for f in frames]
    if len(set(stems_in)) != len(stems_in):
        raise ValueError("frame stems must be unique")
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            n = len(frames)
            results = list(pool.map(_run_frame, frames, [methods] * n, [config] * n, [keep_predictions] * n))
    else:
        results = [_run_frame(f, methods, config, keep_predictions) for f in frames]
    per_frame = dict(sorted(zip(stems_in, (r[0] for r in results))))
    predictions = dict(sorted(zip(stems_in, (r[1] for r in results)))) if keep_predictions else {}
    stems = sorted(per_frame)
    notes = []
    if "inpaint-baseline" in names:
        notes.append("inpaint-baseline uses harmonic (Laplace) hole filling")
    return BenchmarkReport(
        names, stems, per_frame, _aggregate(names, stems, per_frame), notes,
        time.perf_counter() - t0, predictions,
    )
