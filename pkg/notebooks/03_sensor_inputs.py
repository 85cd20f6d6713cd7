# %% [markdown]
# # Camera and LiDAR style inputs
#
# Images are scaled to cover the camera frame and centre-cropped. Point
# clouds are binned into an occupancy-count voxel grid.

# %%
import numpy as np

from thermofuzz.tensors import (
    CameraConfig,
    VoxelGridConfig,
    gen_inputs,
    prepare_image,
    synthetic_image,
    synthetic_point_cloud,
    voxelize,
)
from thermofuzz.starters import starter_graphs

rng = np.random.default_rng(0)
raw = synthetic_image(rng, 48, 64)
frame = prepare_image(raw, CameraConfig(24, 24))
print(raw.shape, "->", frame.shape, frame.dtype, float(frame.min()), float(frame.max()))

# %%
cloud = synthetic_point_cloud(rng, n=2000)
grid = voxelize(cloud, VoxelGridConfig(((0, 40), (-20, 20), (-2, 2)), (16, 16, 4)))
print("points in bounds:", int(grid.sum()), "of", len(cloud))
print("occupied cells:", int((grid > 0).sum()), "of", grid.size)

# %% [markdown]
# Per-graph inputs are a pure function of the seed.

# %%
for name, g in starter_graphs().items():
    xs = gen_inputs(g, rng_seed=42)
    print(f"{name:16s} {[x.shape for x in xs]} mean={float(np.mean(xs[0])):.3f}")
