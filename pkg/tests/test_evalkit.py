import math

import numpy as np
import pytest

from depthground import DepthMap, SolverConfig, compute_metrics, evaluate_regions, generate_scene, run_benchmark
from depthground.errors import EmptyRegionError
from depthground.evalkit import METRICS, REGIONS, ExternalMethod, Frame, SceneParams


def loop_metrics(pred, pred_valid, gt, gt_valid, mask):
    """Plain-Python MAE / RMSE / REL sharing no code with the package."""
    abs_sum = sq_sum = rel_sum = 0.0
    n = 0
    for i in range(len(gt)):
        for j in range(len(gt[0])):
            if mask[i][j] and gt_valid[i][j] and pred_valid[i][j]:
                e = abs(pred[i][j] - gt[i][j])
                abs_sum += e
                sq_sum += e * e
                rel_sum += e / gt[i][j]
                n += 1
    return abs_sum / n, math.sqrt(sq_sum / n), rel_sum / n, n


def test_metrics_perfect_prediction():
    gt = DepthMap.dense(np.random.default_rng(0).uniform(0.5, 2.0, (4, 4)))
    assert compute_metrics(gt, gt)[:3] == (0.0, 0.0, 0.0)


def test_metrics_constant_offset():
    gt = DepthMap.dense(np.ones((3, 5)))
    pred = DepthMap.dense(np.full((3, 5), 1.1))
    mae, rmse, rel, n = compute_metrics(pred, gt)
    assert (mae, rmse, rel) == pytest.approx((0.1, 0.1, 0.1), rel=1e-12)
    assert n == 15


def test_metrics_two_pixels():
    gt = DepthMap.dense([[1.0, 1.0]])
    pred = DepthMap.dense([[1.1, 0.7]])
    mae, rmse, rel, _ = compute_metrics(pred, gt)
    assert mae == pytest.approx(0.2, rel=1e-12)
    assert rmse == pytest.approx(math.sqrt(0.05), rel=1e-12)
    assert rel == pytest.approx(0.2, rel=1e-12)


def test_metrics_invalid_prediction_handling():
    gt = DepthMap.dense([[1.0, 2.0]])
    pred = DepthMap([[1.5, 0.0]], [[True, False]])
    assert compute_metrics(pred, gt) == pytest.approx((0.5, 0.5, 0.5, 1))
    mae, _, _, n = compute_metrics(pred, gt, invalid_pred="penalize")
    assert n == 2 and mae == pytest.approx(1.25)


def test_metrics_empty_region():
    gt = DepthMap.dense(np.ones((2, 2)))
    with pytest.raises(EmptyRegionError, match="empty region"):
        compute_metrics(gt, gt, np.zeros((2, 2), dtype=bool))


@pytest.mark.parametrize("seed", range(50))
def test_metrics_match_loop_oracle(seed):
    r = np.random.default_rng(seed)
    gt = DepthMap(r.uniform(0.2, 3.0, (8, 8)), r.random((8, 8)) < 0.9)
    pred = DepthMap(r.uniform(0.2, 3.0, (8, 8)), r.random((8, 8)) < 0.9)
    mask = r.random((8, 8)) < 0.7
    got = compute_metrics(pred, gt, mask)
    exp = loop_metrics(pred.values.tolist(), pred.valid.tolist(), gt.values.tolist(), gt.valid.tolist(), mask.tolist())
    assert got[3] == exp[3]
    assert all(abs(a - b) <= 1e-12 for a, b in zip(got[:3], exp[:3]))
    assert got[1] >= got[0]


def test_all_true_mask_has_no_background():
    gt = DepthMap.dense(np.ones((3, 3)))
    pred = DepthMap.dense(np.full((3, 3), 1.2))
    rep = evaluate_regions(pred, gt, np.ones((3, 3), dtype=bool))
    assert rep.background is None
    assert rep.objects == rep.full


def test_checkerboard_mask_constant_error():
    gt = DepthMap.dense(np.random.default_rng(1).uniform(0.5, 1.5, (6, 6)))
    pred = DepthMap.dense(gt.values + 0.05)
    mask = (np.add.outer(np.arange(6), np.arange(6)) % 2).astype(bool)
    rep = evaluate_regions(pred, gt, mask)
    maes = [rep.region(r).mae for r in REGIONS]
    assert max(maes) - min(maes) < 1e-15


def test_full_mae_is_weighted_mean_of_regions():
    r = np.random.default_rng(2)
    gt = DepthMap(r.uniform(0.5, 1.5, (10, 12)), r.random((10, 12)) < 0.9)
    pred_vals = gt.values.copy()
    mask = r.random((10, 12)) < 0.4
    pred_vals[mask] += r.normal(0, 0.05, mask.sum())
    pred = DepthMap.dense(np.where(gt.valid, pred_vals, 1.0))
    rep = evaluate_regions(pred, gt, mask)
    assert rep.background.mae == 0.0 and rep.background.rmse == 0.0 and rep.background.rel == 0.0
    o, b, f = rep.objects, rep.background, rep.full
    assert f.pixel_count == o.pixel_count + b.pixel_count
    weighted = (o.pixel_count * o.mae + b.pixel_count * b.mae) / f.pixel_count
    assert abs(f.mae - weighted) <= 1e-12
    assert o.rmse >= o.mae and f.rmse >= f.mae


def test_missing_mask_reports_full_only():
    gt = DepthMap.dense(np.ones((2, 3)))
    rep = evaluate_regions(gt, gt)
    assert rep.objects is None and rep.background is None
    assert rep.full.pixel_count == 6
    assert "absent" in rep.render()


def test_scene_determinism():
    a, b = generate_scene(7), generate_scene(7)
    for name in ("gt", "sensor", "mde"):
        assert getattr(a, name) == getattr(b, name)
        assert getattr(a, name).values.tobytes() == getattr(b, name).values.tobytes()
    assert np.array_equal(a.object_mask, b.object_mask)
    assert a.sensor.valid_count == b.sensor.valid_count
    assert generate_scene(8).gt != a.gt


def test_default_scene_properties():
    s = generate_scene(7)
    assert s.gt.shape == (240, 320)
    assert s.gt.valid.all()
    assert 0.4 <= s.gt.values.min() and s.gt.values.max() <= 1.7
    assert s.object_mask.any() and not s.object_mask.all()
    missing = ~s.sensor.valid
    # holes concentrate on objects; the background sees only sparse dropout
    assert missing[s.object_mask].mean() > 0.4
    assert missing[~s.object_mask].mean() < 0.03


def test_clean_scene_is_undistorted():
    s = generate_scene(3, SceneParams.clean(height=40, width=60, alpha=(1.0, 1.0), beta=(0.0, 0.0)))
    assert np.array_equal(s.mde.values, s.gt.values)
    assert np.array_equal(s.sensor.values, s.gt.values)
    assert s.sensor.valid.all()


def test_full_hole_fraction_invalidates_objects_exactly():
    p = SceneParams(height=48, width=64, hole_fraction=1.0, corruption_fraction=0.0, background_dropout=0.0)
    s = generate_scene(5, p)
    assert np.array_equal(~s.sensor.valid, s.object_mask)


def test_scene_params_validation():
    with pytest.raises(ValueError):
        SceneParams(distortion="wavy")
    with pytest.raises(ValueError):
        SceneParams(hole_fraction=0.8, corruption_fraction=0.5)


@pytest.fixture(scope="module")
def tiny_frames():
    p = SceneParams(height=32, width=48)
    return [generate_scene(s, p) for s in (4, 1)]


def test_benchmark_structure(tiny_frames):
    rep = run_benchmark(tiny_frames, config=SolverConfig(patch_size=16))
    assert rep.frames == ["scene000001", "scene000004"]
    rows = rep.table_rows()
    assert len(rows) == 5 and all(len(r) == 1 + len(REGIONS) * len(METRICS) for r in rows)
    for m in rep.methods:
        for r in REGIONS:
            assert rep.summary[m][r]["frames"] == 2
            assert rep.metric(m, r, "rmse") >= rep.metric(m, r, "mae")
    text = rep.to_text()
    assert "anchord.objects.mae = " in text and "harmonic" in text
    assert rep.to_json() == run_benchmark(tiny_frames, config=SolverConfig(patch_size=16)).to_json()


def test_benchmark_single_method_and_failures(tiny_frames):
    broken = Frame("broken", DepthMap(np.zeros((32, 48))), tiny_frames[0].mde, tiny_frames[0].gt)
    frames = [Frame.from_scene(tiny_frames[0]), broken]
    rep = run_benchmark(frames, methods=["affine-baseline"], config=SolverConfig(patch_size=16))
    assert len(rep.table_rows()) == 1
    assert "error" in rep.per_frame["broken"]["affine-baseline"]
    assert rep.summary["affine-baseline"]["full"]["frames"] == 1
    assert "affine-baseline.failures = 1" in rep.to_text()


def test_benchmark_noiseless_affine_scene():
    p = SceneParams.clean(height=32, width=48, n_objects=(0, 0))
    rep = run_benchmark([generate_scene(0, p)], methods=["anchord", "affine-baseline"], config=SolverConfig(patch_size=16))
    assert rep.metric("anchord", "full", "mae") < 1e-3
    assert rep.metric("affine-baseline", "full", "mae") < 1e-9


def test_benchmark_external_method(tiny_frames):
    gts = {s.stem: s.gt for s in tiny_frames}
    ext = ExternalMethod("oracle", lambda stem: gts[stem])
    rep = run_benchmark(tiny_frames, methods=[ext], config=SolverConfig(patch_size=16))
    assert rep.metric("oracle", "full", "mae") == 0.0


def test_benchmark_rejects_duplicate_stems(tiny_frames):
    with pytest.raises(ValueError, match="unique"):
        run_benchmark([tiny_frames[0], tiny_frames[0]], methods=["affine-baseline"])
