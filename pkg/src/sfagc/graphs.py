"""Neighborhood construction over point sets: k-NN graphs, farthest point
sampling, score ranking, and fixed-radius ball grouping.

All routines are brute force over pairwise distances, deterministic, and
tie-broken by ascending node index so identical inputs always produce
identical index sets.  Distances are Euclidean in whatever coordinate
space the caller passes in, which may be a learned feature space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, ShapeError

__all__ = [
    "PointSet",
    "KnnGraph",
    "pairwise_sq_dists",
    "build_knn_graph",
    "fps_select",
    "rank_topk",
    "ball_query",
]


def _coords2d(coords, op: str) -> np.ndarray:
    arr = np.asarray(getattr(coords, "data", coords), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ShapeError(f"{op}: coords must be (N, C) with N >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidArgument(f"{op}: coords contain non-finite values")
    return arr


@dataclass
class PointSet:
    """A cloud of N points: coordinates (N, C) and node features (N, D).

    Either field may be a raw array or an autodiff Tensor; both sides must
    agree on N.  Feature-less clouds conventionally carry feats == coords.
    """

    coords: object
    feats: object

    def __post_init__(self):
        ca = np.asarray(getattr(self.coords, "data", self.coords))
        fa = np.asarray(getattr(self.feats, "data", self.feats))
        if ca.ndim != 2 or fa.ndim != 2:
            raise ShapeError(
                f"PointSet: coords and feats must be 2-D, got {ca.shape} and {fa.shape}"
            )
        if ca.shape[0] != fa.shape[0] or ca.shape[0] < 1:
            raise ShapeError(
                f"PointSet: coords rows {ca.shape[0]} and feats rows {fa.shape[0]} must match and be >= 1"
            )

    @property
    def n(self) -> int:
        return np.asarray(getattr(self.coords, "data", self.coords)).shape[0]


@dataclass
class KnnGraph:
    """Directed neighbor lists: neighbors[v] holds v's k nearest, nearest first."""

    k: int
    neighbors: np.ndarray

    def __post_init__(self):
        nb = np.asarray(self.neighbors)
        if nb.ndim != 2 or nb.shape[1] != self.k:
            raise ShapeError(f"KnnGraph: neighbor array {nb.shape} does not match k={self.k}")
        n = nb.shape[0]
        if nb.size and (nb.min() < 0 or nb.max() >= n):
            raise InvalidArgument("KnnGraph: neighbor index out of range")
        if (nb == np.arange(n)[:, None]).any():
            raise InvalidArgument("KnnGraph: self-loop in neighbor list")
        self.neighbors = nb

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray, block: int = 256) -> np.ndarray:
    """Squared Euclidean distances (len(a), len(b)), computed row-blockwise.

    Uses the direct (x - y)^2 form rather than the expanded dot-product
    identity, trading speed for exact symmetry and non-negativity.
    """
    out = np.empty((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], block):
        stop = min(start + block, a.shape[0])
        diff = a[start:stop, None, :] - b[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def build_knn_graph(coords, k: int) -> KnnGraph:
    """k nearest neighbors of every node, excluding the node itself.

    Neighbors are ordered by ascending distance; exact distance ties fall
    to the lower index.  Requires k < N.
    """
    arr = _coords2d(coords, "build_knn_graph")
    n = arr.shape[0]
    if not 1 <= k < n:
        raise InvalidArgument(f"build_knn_graph: need 1 <= k < N, got k={k}, N={n}")
    d2 = pairwise_sq_dists(arr, arr)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return KnnGraph(k=k, neighbors=order[:, :k].astype(np.int64))


def fps_select(coords, t: int, seed_index: int = 0) -> np.ndarray:
    """Greedy farthest point sampling: t indices, max-min spread.

    Starts at seed_index, then repeatedly takes the point farthest (in
    squared Euclidean distance) from everything chosen so far, ties to
    the lower index.  Output order is selection order.
    """
    arr = _coords2d(coords, "fps_select")
    n = arr.shape[0]
    if not 1 <= t <= n:
        raise InvalidArgument(f"fps_select: need 1 <= t <= N, got t={t}, N={n}")
    if not 0 <= seed_index < n:
        raise InvalidArgument(f"fps_select: seed_index {seed_index} out of range for N={n}")
    chosen = np.empty(t, dtype=np.int64)
    chosen[0] = seed_index
    diff = arr - arr[seed_index]
    best = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, t):
        nxt = int(np.argmax(best))  # argmax takes the first max: lower index wins ties
        chosen[i] = nxt
        diff = arr - arr[nxt]
        np.minimum(best, np.einsum("ij,ij->i", diff, diff), out=best)
    return chosen


def rank_topk(scores, t: int) -> np.ndarray:
    """Indices of the t largest scores, descending, ties to the lower index."""
    arr = np.asarray(getattr(scores, "data", scores), dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"rank_topk: scores must be 1-D, got {arr.shape}")
    if not 1 <= t <= arr.shape[0]:
        raise InvalidArgument(f"rank_topk: need 1 <= t <= N, got t={t}, N={arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise InvalidArgument("rank_topk: scores contain non-finite values")
    return np.argsort(-arr, kind="stable")[:t].astype(np.int64)


def ball_query(coords, centroid_idx, radius: float, cap: int) -> np.ndarray:
    """Group up to cap nodes within radius of each centroid.

    Row i lists members for centroid_idx[i]: the centroid itself first,
    then other in-radius nodes by ascending distance (ties to the lower
    index), padded to cap by repeating the centroid index.
    """
    arr = _coords2d(coords, "ball_query")
    n = arr.shape[0]
    cent = np.asarray(centroid_idx, dtype=np.int64)
    if cent.ndim != 1:
        raise ShapeError(f"ball_query: centroid_idx must be 1-D, got {cent.shape}")
    if radius <= 0.0:
        raise InvalidArgument(f"ball_query: radius must be positive, got {radius}")
    if cap < 1:
        raise InvalidArgument(f"ball_query: cap must be >= 1, got {cap}")
    if cent.size and (cent.min() < 0 or cent.max() >= n):
        raise InvalidArgument("ball_query: centroid index out of range")
    r2 = radius * radius
    out = np.empty((cent.shape[0], cap), dtype=np.int64)
    for row, c in enumerate(cent):
        diff = arr - arr[c]
        d2 = np.einsum("ij,ij->i", diff, diff)
        inside = np.flatnonzero(d2 <= r2)
        inside = inside[inside != c]
        inside = inside[np.argsort(d2[inside], kind="stable")]
        members = np.concatenate(([c], inside))[:cap]
        out[row, : members.shape[0]] = members
        out[row, members.shape[0] :] = c
    return out
