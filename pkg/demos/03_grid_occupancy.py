"""How sparse does the multi-resolution feature grid get?

Only voxels that actually touch geometry store features.  For shell-like
scenes (walls and a couple of objects) the occupied fraction drops fast as
resolution doubles, because surface area grows like r^2 while the voxel
count grows like r^3.  This script prints the occupancy table for the
Cornell-style box at six levels.
"""
import numpy as np

from neuralgi import scenes
from neuralgi.autodiff import ParamStore
from neuralgi.field import build_sparse_grid

scene = scenes.build(scenes.cornell_doc())
grid = build_sparse_grid(scene, levels=6, feat_dim=16,
                         rng=np.random.default_rng(0), params=ParamStore())

print(f"{'res':>5} {'voxels':>9} {'of total':>10} {'density%':>9} "
      f"{'vertices':>9} {'KiB':>8}")
for st in grid.stats():
    total = st.resolution ** 3
    print(f"{st.resolution:>5} {st.occupied_voxels:>9} {total:>10} "
          f"{st.density_percent:>9.3f} {st.stored_vertices:>9} "
          f"{st.feature_bytes / 1024:>8.1f}")
