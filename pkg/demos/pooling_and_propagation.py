"""Downsample with both pooling flavors, then interpolate back up.

Score-based pooling keeps the nodes the network scores highest;
FPS pooling keeps a geometrically even subset.  Feature propagation
undoes the downsampling for dense per-point prediction.
"""

import numpy as np

from sfagc.autodiff import no_grad
from sfagc.graphs import PointSet
from sfagc.layer import SfagcConfig
from sfagc.pooling import FpsPoolLayer, PropagationLayer, ScorePoolLayer

rng = np.random.default_rng(7)
n = 256
cloud = rng.normal(size=(n, 3))
cloud /= np.maximum(np.linalg.norm(cloud, axis=1, keepdims=True), 1e-9)

cfg = SfagcConfig(c_in=3, f_in=3, f_out=12, k=8, c_out=3, coord_update="identity")

if __name__ == "__main__":
    points = PointSet(coords=cloud, feats=cloud.copy())

    score_pool = ScorePoolLayer(cfg, t=64, rng=rng, coords_from_features=False, prefix="sp.")
    fps_pool = FpsPoolLayer(cfg, t=64, rng=rng, prefix="fp.")
    with no_grad():
        by_score = score_pool(points)
        by_fps = fps_pool(points)
    print(f"input {n} nodes -> score pool {by_score.feats.shape[0]}, fps pool {by_fps.feats.shape[0]}")
    print(f"score pool kept indices (first 8): {by_score.idx_select[:8]}")
    print(f"fps   pool kept indices (first 8): {by_fps.idx_select[:8]}")

    # nearest-kept-node distance tells how evenly each subset covers the surface
    for name, kept in (("score", by_score), ("fps", by_fps)):
        d2 = ((cloud[:, None] - cloud[kept.idx_select][None]) ** 2).sum(-1)
        worst = float(np.sqrt(d2.min(axis=1).max()))
        print(f"{name}: farthest original node sits {worst:.3f} from its nearest kept node")

    prop = PropagationLayer(f_src=12, f_skip=3, f_out=10, rng=rng, prefix="up.")
    with no_grad():
        dense = prop(by_fps, points.coords, skip_feats=points.feats)
    print(f"propagated back up: {dense.shape} features on all {n} nodes")
