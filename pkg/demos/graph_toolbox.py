"""The four graph primitives on a real sampled surface.

Shows neighbor statistics on a unit sphere, how farthest point sampling
spreads its picks compared to random subsampling, and what ball queries
return near the poles.
"""

import numpy as np

from sfagc.datasets import normalize_unit_sphere
from sfagc.graphs import ball_query, build_knn_graph, fps_select, rank_topk


def min_pairwise_dist(pts):
    d2 = ((pts[:, None] - pts[None]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


if __name__ == "__main__":
    rng = np.random.default_rng(3)
    cloud = rng.normal(size=(512, 3))
    cloud /= np.linalg.norm(cloud, axis=1, keepdims=True)  # points on the sphere
    cloud = normalize_unit_sphere(cloud)

    graph = build_knn_graph(cloud, k=8)
    edge_len = np.sqrt(((cloud[graph.neighbors] - cloud[:, None]) ** 2).sum(-1))
    print(f"k=8 graph on 512 sphere points: mean edge {edge_len.mean():.3f}, max {edge_len.max():.3f}")

    # FPS picks stay spread out; random picks clump
    picked = fps_select(cloud, 32)
    random_pick = rng.choice(512, size=32, replace=False)
    print(f"min distance between 32 FPS picks:    {min_pairwise_dist(cloud[picked]):.3f}")
    print(f"min distance between 32 random picks: {min_pairwise_dist(cloud[random_pick]):.3f}")

    # rank_topk is the score-pooling workhorse: top responders by any scalar
    height = cloud[:, 2]
    top = rank_topk(height, 5)
    print(f"5 highest points sit at z = {np.round(cloud[top, 2], 3)}")

    members = ball_query(cloud, top, radius=0.3, cap=12)
    counts = [(len(set(row)) - 1) for row in members]
    print(f"ball query r=0.3 around them: {counts} distinct neighbors each (cap 12)")
