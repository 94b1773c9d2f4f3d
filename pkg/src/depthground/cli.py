"""Command line: ``depthground {complete,eval,bench,sweep,synth}``.

Solver settings come from built-in defaults, then an optional flat
``key = value`` config file (``--config``), then command-line flags with the
same names. Exit status is 0 on success, 1 for input/configuration errors
and 2 for numerical failures; errors print one line
``error: <class>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, DepthGroundError, DivergenceError, InputMissingError
from .evalkit import (
    BENCH_METHODS,
    ExternalMethod,
    SceneParams,
    default_suite,
    evaluate_regions,
    run_benchmark,
)
from .graph import FactorWeights
from .pipeline import METHODS, complete_depth
from .robust import HuberParams
from .solver import SolverConfig

# flat config keys and their value types
SOLVER_KEYS = {
    "patch_size": int,
    "lambda_mde": float,
    "lambda_sen": float,
    "lambda_slp": float,
    "delta1": float,
    "delta2": float,
    "k": int,
    "seed": int,
    "max_iterations": int,
    "rel_tol": float,
    "depth_floor": float,
    "cg_max_iterations": int,
    "cg_tol": float,
    "damping_init": float,
    "abs_tol": float,
}
RUN_KEYS = {
    "method": str,
    "uncertainty_norm": str,
    "lambda_mde_grid": str,
    "lambda_sen_grid": str,
    "scenes": int,
    "first_seed": int,
    "scene_height": int,
    "scene_width": int,
    "workers": int,
}

SUITE_HEIGHT, SUITE_WIDTH, SUITE_PATCH = 96, 128, 16


@dataclass
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    method: str = "anchord"
    uncertainty_norm: str = "image"
    lambda_mde_grid: tuple[float, ...] = (1.25, 2.5, 5.0)
    lambda_sen_grid: tuple[float, ...] = (0.25, 0.5, 1.0)
    scenes: int = 20
    first_seed: int = 0
    scene_height: int = SUITE_HEIGHT
    scene_width: int = SUITE_WIDTH
    workers: int = 1

    def echo(self) -> dict:
        s = self.solver
        out = {
            "patch_size": s.patch_size,
            **asdict(s.weights),
            **asdict(s.huber),
            **{f.name: getattr(s, f.name) for f in fields(s) if f.name not in ("patch_size", "weights", "huber")},
        }
        out.update(
            method=self.method,
            uncertainty_norm=self.uncertainty_norm,
            lambda_mde_grid=list(self.lambda_mde_grid),
            lambda_sen_grid=list(self.lambda_sen_grid),
        )
        return out


def parse_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise InputMissingError(f"config file {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in SOLVER_KEYS and key not in RUN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _grid(text: str) -> tuple[float, ...]:
    vals = tuple(float(t) for t in text.split(",") if t.strip())
    if not vals:
        raise ConfigError("sweep grid must not be empty")
    return vals


def build_run_config(values: dict) -> RunConfig:
    """Typed :class:`RunConfig` from string/number key-value pairs."""
    try:
        typed = {}
        for key, value in values.items():
            if value is None:
                continue
            cast = SOLVER_KEYS.get(key) or RUN_KEYS[key]
            typed[key] = cast(value)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc

    default = SolverConfig()
    solver = SolverConfig(
        patch_size=typed.get("patch_size", default.patch_size),
        weights=FactorWeights(
            typed.get("lambda_mde", default.weights.lambda_mde),
            typed.get("lambda_sen", default.weights.lambda_sen),
            typed.get("lambda_slp", default.weights.lambda_slp),
        ),
        huber=HuberParams(typed.get("delta1", default.huber.delta1), typed.get("delta2", default.huber.delta2)),
        **{k: typed[k] for k in ("k", "seed", "max_iterations", "rel_tol", "depth_floor",
                                 "cg_max_iterations", "cg_tol", "damping_init", "abs_tol") if k in typed},
    )
    run = RunConfig(solver=solver)
    for key in ("method", "uncertainty_norm", "scenes", "first_seed", "scene_height", "scene_width", "workers"):
        if key in typed:
            setattr(run, key, typed[key])
    if "lambda_mde_grid" in typed:
        run.lambda_mde_grid = _grid(typed["lambda_mde_grid"])
    if "lambda_sen_grid" in typed:
        run.lambda_sen_grid = _grid(typed["lambda_sen_grid"])
    if run.method not in METHODS:
        raise ConfigError(f"unknown method {run.method!r}; expected one of {', '.join(METHODS)}")
    if run.uncertainty_norm != "image":
        try:
            if float(run.uncertainty_norm) <= 0:
                raise ValueError
        except ValueError:
            raise ConfigError("uncertainty_norm must be 'image' or a positive number") from None
    return run


def _collect(args, defaults: dict | None = None) -> RunConfig:
    values = dict(defaults or {})
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for key in list(SOLVER_KEYS) + list(RUN_KEYS):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return build_run_config(values)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# --------------------------------------------------------------------------- commands


def cmd_complete(args) -> int:
    run = _collect(args)
    sensor = io.load_depth(args.sensor)
    mde = io.load_depth(args.mde)
    t0 = time.perf_counter()
    result = complete_depth(sensor, mde, run.solver, run.method)
    elapsed = time.perf_counter() - t0

    io.save_depth(result.depth, args.out)
    if args.out_f32:
        io.save_raw_f32(result.depth, args.out_f32)
    summary = {
        "method": run.method,
        "input_shape": list(sensor.shape),
        "config": run.echo(),
        "stats": result.stats.as_dict() if result.stats else None,
    }
    if args.uncertainty:
        energy = result.residual_energy(run.solver)
        norm = float(energy.max()) if run.uncertainty_norm == "image" else float(run.uncertainty_norm)
        unc = energy / (norm if norm > 0 else 1.0)
        np.save(args.uncertainty, unc)
        summary["uncertainty_normalizer"] = norm
    if args.gt:
        gt = io.load_depth(args.gt)
        mask = io.load_mask(args.mask) if args.mask else None
        summary["evaluation"] = evaluate_regions(result.depth, gt, mask).as_dict()
    if args.record_timing:
        # opt-in: timing makes the summary differ between identical runs
        summary["elapsed_seconds"] = elapsed
    if args.summary:
        _write_text(Path(args.summary), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"complete: method={run.method} elapsed={elapsed:.3f}s -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    pred = io.load_depth(args.pred)
    gt = io.load_depth(args.gt)
    mask = io.load_mask(args.mask) if args.mask else None
    report = evaluate_regions(pred, gt, mask)
    text = report.render()
    print(text)
    if args.out:
        _write_text(Path(args.out), text + "\n")
    if args.json:
        _write_text(Path(args.json), json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def _frames(args, run: RunConfig):
    if args.dataset:
        return io.dataset_frames(args.dataset)
    if run.scenes < 1:
        raise ConfigError("scenes must be >= 1")
    params = SceneParams(height=run.scene_height, width=run.scene_width)
    return default_suite(run.scenes, run.first_seed, params)


def _methods(spec: str | None) -> list:
    if not spec:
        return list(BENCH_METHODS)
    methods = []
    for token in (t.strip() for t in spec.split(",") if t.strip()):
        if "=" in token:
            name, directory = token.split("=", 1)
            methods.append(ExternalMethod(name, _external_loader(Path(directory))))
        elif token in BENCH_METHODS:
            methods.append(token)
        else:
            raise ConfigError(f"unknown benchmark method {token!r}")
    return methods


def _external_loader(directory: Path):
    def load(stem: str):
        for suffix in (".png", ".f32"):
            path = directory / f"{stem}{suffix}"
            if path.is_file():
                return io.load_depth(path)
        raise InputMissingError(f"no prediction for {stem} in {directory}")

    return load


_BENCH_DEFAULTS = {"patch_size": SUITE_PATCH}


def cmd_bench(args) -> int:
    run = _collect(args, None if args.dataset else _BENCH_DEFAULTS)
    frames = _frames(args, run)
    report = run_benchmark(
        frames, _methods(args.methods), run.solver, workers=run.workers,
        keep_predictions=args.save_predictions,
    )
    out = Path(args.out_dir)
    for stem, preds in report.predictions.items():
        for method, depth in preds.items():
            (out / "predictions" / method).mkdir(parents=True, exist_ok=True)
            io.save_depth_png16(depth, out / "predictions" / method / f"{stem}.png")
    _write_text(out / "report.txt", report.to_text())
    _write_text(out / "report.json", report.to_json() + "\n")
    print(report.render_table())
    print(f"bench: {len(report.frames)} frame(s) in {report.elapsed:.1f}s -> {out}")
    return 0


def sweep_matrix(frames, run: RunConfig, workers: int = 1) -> dict:
    """Mean full-region MAE of the full method for every ``(lambda_mde, lambda_sen)`` pair."""
    cells = []
    matrix = []
    for lm in run.lambda_mde_grid:
        row = []
        for ls in run.lambda_sen_grid:
            cfg = run.solver.with_weights(lambda_mde=lm, lambda_sen=ls)
            report = run_benchmark(frames, ["anchord"], cfg, workers=workers)
            mae = report.metric("anchord", "full", "mae")
            failures = sum(1 for f in report.frames if "error" in report.per_frame[f]["anchord"])
            row.append(mae)
            cells.append({"lambda_mde": lm, "lambda_sen": ls, "full_mae": mae, "failures": failures})
        matrix.append(row)
    return {
        "lambda_mde_grid": list(run.lambda_mde_grid),
        "lambda_sen_grid": list(run.lambda_sen_grid),
        "full_mae": matrix,
        "cells": cells,
    }


def render_sweep(result: dict) -> str:
    sen = result["lambda_sen_grid"]
    lines = ["full-image MAE [m]; rows lambda_mde, columns lambda_sen", f"{'':>10}" + "".join(f"{s:>10g}" for s in sen)]
    for lm, row in zip(result["lambda_mde_grid"], result["full_mae"]):
        lines.append(f"{lm:>10g}" + "".join(f"{'-' if v is None else format(v, '.4f'):>10}" for v in row))
    return "\n".join(lines)


def cmd_sweep(args) -> int:
    run = _collect(args, None if args.dataset else _BENCH_DEFAULTS)
    frames = _frames(args, run)
    result = sweep_matrix(frames, run, run.workers)
    out = Path(args.out_dir)
    _write_text(out / "sweep.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    text = render_sweep(result)
    _write_text(out / "sweep.txt", text + "\n")
    print(text)
    return 0


def cmd_synth(args) -> int:
    params = SceneParams(height=args.height, width=args.width)
    for scene in default_suite(args.count, args.seed, params):
        io.write_frame(args.out_dir, scene.stem, scene.sensor, scene.mde, scene.gt, scene.object_mask)
    print(f"synth: wrote {args.count} frame(s) to {args.out_dir}")
    return 0


# --------------------------------------------------------------------------- parser


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    g = p.add_argument_group("solver settings (override the config file)")
    for key, typ in SOLVER_KEYS.items():
        g.add_argument(f"--{key}", type=typ, default=None)


def _add_suite_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="directory of <stem>.{sensor,mde,gt,mask}.png frames")
    p.add_argument("--scenes", type=int, help="number of synthetic scenes (default 20)")
    p.add_argument("--first_seed", type=int)
    p.add_argument("--scene_height", type=int)
    p.add_argument("--scene_width", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depthground", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complete", help="complete one depth map")
    p.add_argument("--sensor", required=True)
    p.add_argument("--mde", required=True)
    p.add_argument("--out", required=True, help="output depth (.png PNG16 or .f32)")
    p.add_argument("--out-f32", help="additional lossless raw-f32 output")
    p.add_argument("--uncertainty", help="write normalized residual map (.npy)")
    p.add_argument("--summary", help="write run summary JSON")
    p.add_argument("--record-timing", action="store_true", help="include wall time in the summary")
    p.add_argument("--gt")
    p.add_argument("--mask")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--uncertainty_norm", help="'image' or a dataset-wide normalizer")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("eval", help="region metrics of a prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask")
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="benchmark methods on a synthetic suite or dataset")
    p.add_argument("--methods", help=f"comma list of {', '.join(BENCH_METHODS)} or NAME=DIR")
    p.add_argument("--save-predictions", action="store_true", help="write predictions/<method>/<stem>.png")
    _add_suite_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="lambda_mde x lambda_sen sensitivity matrix")
    p.add_argument("--lambda_mde_grid")
    p.add_argument("--lambda_sen_grid")
    _add_suite_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write synthetic scenes to disk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--height", type=int, default=SceneParams.height)
    p.add_argument("--width", type=int, default=SceneParams.width)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc.error_class}: {exc}", file=sys.stderr)
        return 2
    except DepthGroundError as exc:
        print(f"error: {exc.error_class}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ArithmeticError as exc:
        print(f"error: numerical-failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: input-error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
