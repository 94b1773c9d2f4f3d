"""Ablations on a small suite: what the patch grid and the smoothing step buy.

* anchord-no-patch shares one affine pair across the image.
* anchord-no-smooth returns the optimized dense depth directly.

Run:  python demos/ablations.py [n_scenes]
"""

import sys

from depthground import SolverConfig, run_benchmark
from depthground.evalkit import SceneParams, default_suite

n = int(sys.argv[1]) if len(sys.argv) > 1 else 6
frames = default_suite(n, first_seed=0, params=SceneParams(height=96, width=128))
report = run_benchmark(frames, config=SolverConfig(patch_size=16))
print(report.render_table())

full = report.metric("anchord", "objects", "mae")
print(f"\nobject MAE, full method:      {full:.4f} m")
print(f"object MAE, single patch:     {report.metric('anchord-no-patch', 'objects', 'mae'):.4f} m")
print(f"object MAE, global affine:    {report.metric('affine-baseline', 'objects', 'mae'):.4f} m")
print(f"full-image MAE, no smoothing: {report.metric('anchord-no-smooth', 'full', 'mae'):.4f} m "
      f"(with smoothing {report.metric('anchord', 'full', 'mae'):.4f} m)")
