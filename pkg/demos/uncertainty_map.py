"""Per-pixel residual map after completion, used as an uncertainty cue.

The map adds the weighted robust sensor and prior residuals at every pixel
of the optimized solution. Large values mark pixels where the sensor
disagrees with the aligned prior, which on this data means corrupted
readings on objects.

Run:  python demos/uncertainty_map.py [out.npy]
"""

import sys

import numpy as np

from depthground import SolverConfig, complete_depth, generate_scene
from depthground.core import resize_mask
from depthground.evalkit import SceneParams
from depthground.graph import residual_uncertainty

scene = generate_scene(seed=2, params=SceneParams(height=96, width=128))
config = SolverConfig(patch_size=16)
result = complete_depth(scene.sensor, scene.mde, config)

u = residual_uncertainty(
    result.state, result.sensor_r, result.mde_r, result.grid, config.weights, config.huber
)
mask = resize_mask(scene.object_mask, *u.shape)

# the corrupted readings are the valid sensor pixels that are off by a few cm
corrupt = scene.sensor.valid & (np.abs(scene.sensor.values - scene.gt.values) > 0.02)
corrupt = resize_mask(corrupt, *u.shape)

print(f"mean uncertainty on objects     {u[mask].mean():.3f}")
print(f"mean uncertainty on background  {u[~mask].mean():.3f}")
print(f"mean uncertainty on corrupted   {u[corrupt].mean():.3f}")
top = u >= np.quantile(u, 0.95)
print(f"share of the top 5% that lies on corrupted pixels: {(top & corrupt).sum() / top.sum():.0%}")

if len(sys.argv) > 1:
    np.save(sys.argv[1], u)
    print(f"saved {u.shape} map to {sys.argv[1]}")
