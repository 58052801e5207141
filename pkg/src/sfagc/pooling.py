"""Graph pooling and resolution changes for point-cloud networks.

Two downsampling styles share a common pattern: a selection branch picks
t of the N nodes, while a parallel graph-convolution branch recomputes
features and coordinates; the pooled set combines both.

* score_based_pool ranks nodes by a learned softmax score over the whole
  set, scales features by their scores, and merges with the convolution
  branch through a learned map.
* fps_based_pool selects by farthest point sampling and keeps the
  convolution branch's outputs at the selected nodes.

Upsampling (feature_propagation) interpolates coarse features back onto
a finer node set by inverse-distance weighting of the three nearest
sources, then mixes in skip features.  set_abstraction_msg is the
multi-scale grouping layer used as an auxiliary encoder branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Linear, Tensor, as_tensor, concat, leaky_relu, softmax, take_rows
from .errors import InvalidArgument, ShapeError
from .graphs import PointSet, ball_query, fps_select, pairwise_sq_dists, rank_topk
from .layer import SfagcConfig, init_params, sfagc_forward

__all__ = [
    "PooledSet",
    "ScorePoolLayer",
    "FpsPoolLayer",
    "PropagationLayer",
    "SetAbstractionLayer",
    "node_scores",
    "interpolation_weights",
    "canonical_fps_seed",
]


@dataclass
class PooledSet:
    """A pooled cloud plus the original indices its nodes came from."""

    coords: object
    feats: object
    idx_select: np.ndarray

    def __post_init__(self):
        n = np.asarray(getattr(self.coords, "data", self.coords)).shape[0]
        if self.idx_select.shape != (n,):
            raise ShapeError(
                f"PooledSet: idx_select {self.idx_select.shape} does not match {n} pooled nodes"
            )


def node_scores(feats, score_map: Linear) -> Tensor:
    """One scalar importance score per node, softmax-normalized over the
    whole set: nonnegative, sums to one."""
    h = as_tensor(feats)
    logits = score_map(h).reshape(h.shape[0])
    return softmax(logits, axis=0)


def canonical_fps_seed(coords: np.ndarray) -> int:
    """Seed index for FPS inside network layers: the point farthest from
    the centroid, ties to the lower index.  Depends only on geometry, so
    pooled networks commute with input reordering."""
    centroid = coords.mean(axis=0)
    diff = coords - centroid
    return int(np.argmax(np.einsum("ij,ij->i", diff, diff)))


class ScorePoolLayer:
    """Score-ranked pooling with a parallel graph-convolution branch.

    cfg drives the embedded convolution layer; with coords_from_features
    the branch (and its graph) runs on the feature matrix as coordinates.
    t is the pooled size; merge_width the output feature width.
    """

    def __init__(
        self,
        cfg: SfagcConfig,
        t: int,
        rng: np.random.Generator,
        merge_width: int | None = None,
        coords_from_features: bool = True,
        prefix: str = "",
    ):
        if t < 1:
            raise InvalidArgument(f"score pool: t must be >= 1, got {t}")
        self.cfg = cfg
        self.t = t
        self.coords_from_features = coords_from_features
        self.merge_width = cfg.f_out if merge_width is None else merge_width
        self.score_map = Linear(rng, cfg.f_in, 1, prefix + "score")
        self.conv = init_params(cfg, rng, prefix)
        self.merge = Linear(rng, cfg.f_in + cfg.f_out, self.merge_width, prefix + "merge")
        self.alpha = cfg.alpha

    def __call__(self, points: PointSet) -> PooledSet:
        feats = as_tensor(points.feats)
        n = feats.shape[0]
        if self.t > n:
            raise InvalidArgument(f"score pool: t={self.t} exceeds N={n}")
        coords = feats if self.coords_from_features else as_tensor(points.coords)

        scores = node_scores(feats, self.score_map)
        idx = rank_topk(scores.data, self.t)
        scaled = feats * scores.reshape(n, 1)

        branch = sfagc_forward(PointSet(coords=coords, feats=feats), self.conv, self.cfg)

        joined = concat([take_rows(scaled, idx), take_rows(branch.feats, idx)], axis=-1)
        merged = leaky_relu(self.merge(joined), self.alpha)
        return PooledSet(coords=take_rows(branch.coords, idx), feats=merged, idx_select=idx)

    def parameters(self) -> list[Tensor]:
        return self.score_map.parameters() + self.conv.parameters() + self.merge.parameters()


class FpsPoolLayer:
    """Farthest-point-sampled pooling with a parallel convolution branch.

    The selected indices subset the branch's updated features and
    coordinates; with the branch's identity coordinate mode the pooled
    coordinates are a geometric subset of the input ones.
    """

    def __init__(self, cfg: SfagcConfig, t: int, rng: np.random.Generator, prefix: str = ""):
        if t < 1:
            raise InvalidArgument(f"fps pool: t must be >= 1, got {t}")
        self.cfg = cfg
        self.t = t
        self.conv = init_params(cfg, rng, prefix)

    def __call__(self, points: PointSet) -> PooledSet:
        coords = as_tensor(points.coords)
        n = coords.shape[0]
        if self.t > n:
            raise InvalidArgument(f"fps pool: t={self.t} exceeds N={n}")
        idx = fps_select(coords.data, self.t, seed_index=canonical_fps_seed(coords.data))
        branch = sfagc_forward(points, self.conv, self.cfg)
        return PooledSet(
            coords=take_rows(branch.coords, idx),
            feats=take_rows(branch.feats, idx),
            idx_select=idx,
        )

    def parameters(self) -> list[Tensor]:
        return self.conv.parameters()


def interpolation_weights(
    src_coords: np.ndarray, dst_coords: np.ndarray, neighbors: int = 3, exact_eps: float = 1e-10
):
    """Inverse-square-distance weights of each destination's nearest sources.

    Returns (idx, w) of shape (M, neighbors); rows of w sum to one.  A
    destination sitting on a source (distance below exact_eps) copies
    that source exactly.  With fewer sources than requested neighbors,
    the available ones are used.
    """
    m = min(neighbors, src_coords.shape[0])
    d2 = pairwise_sq_dists(dst_coords, src_coords)
    order = np.argsort(d2, axis=1, kind="stable")[:, :m]
    near = np.take_along_axis(d2, order, axis=1)
    with np.errstate(divide="ignore"):
        inv = 1.0 / np.maximum(near, exact_eps**2)
    w = inv / inv.sum(axis=1, keepdims=True)
    exact = near[:, 0] < exact_eps**2
    w[exact] = 0.0
    w[exact, 0] = 1.0
    return order, w


class PropagationLayer:
    """Upsample coarse features to a finer node set and mix skip features.

    Interpolated features are concatenated with the destination's skip
    features (if any) and passed through one activated linear map.
    """

    def __init__(self, f_src: int, f_skip: int, f_out: int, rng: np.random.Generator, prefix: str = "", alpha: float = 0.2):
        self.f_src, self.f_skip = f_src, f_skip
        self.mix = Linear(rng, f_src + f_skip, f_out, prefix + "mix")
        self.alpha = alpha

    def __call__(self, src: PointSet, dst_coords, skip_feats=None) -> Tensor:
        feats = as_tensor(src.feats)
        if feats.shape[1] != self.f_src:
            raise ShapeError(
                f"feature propagation: source width {feats.shape[1]} != expected {self.f_src}"
            )
        sc = np.asarray(getattr(src.coords, "data", src.coords))
        dc = np.asarray(getattr(dst_coords, "data", dst_coords))
        if sc.shape[1] != dc.shape[1]:
            raise ShapeError(
                f"feature propagation: coordinate widths differ, {sc.shape[1]} vs {dc.shape[1]}"
            )
        idx, w = interpolation_weights(sc, dc)
        parts = []
        for j in range(idx.shape[1]):
            parts.append(take_rows(feats, idx[:, j]) * Tensor(w[:, j : j + 1]))
        interp = parts[0]
        for p in parts[1:]:
            interp = interp + p
        if self.f_skip:
            if skip_feats is None:
                raise InvalidArgument("feature propagation: skip features expected but missing")
            interp = concat([interp, as_tensor(skip_feats)], axis=-1)
        return leaky_relu(self.mix(interp), self.alpha)

    def parameters(self) -> list[Tensor]:
        return self.mix.parameters()


class SetAbstractionLayer:
    """Multi-scale grouping encoder: FPS centroids, per-scale ball groups,
    a small pointwise MLP on centered offsets, and a channelwise max.

    scales is a list of (radius, cap, mlp_widths); mlp_widths starts at
    the coordinate width.  Output features concatenate the scales.
    """

    def __init__(self, s: int, c: int, scales, rng: np.random.Generator, prefix: str = "", alpha: float = 0.2):
        if s < 1:
            raise InvalidArgument(f"set abstraction: s must be >= 1, got {s}")
        if not scales:
            raise InvalidArgument("set abstraction: at least one scale required")
        self.s = s
        self.alpha = alpha
        self.scales = []
        for si, (radius, cap, widths) in enumerate(scales):
            if widths[0] != c:
                raise ShapeError(
                    f"set abstraction: scale {si} MLP starts at {widths[0]}, coords are {c}-wide"
                )
            maps = [
                Linear(rng, widths[i], widths[i + 1], f"{prefix}scale{si}_mlp{i}")
                for i in range(len(widths) - 1)
            ]
            self.scales.append((float(radius), int(cap), maps))
        self.out_width = sum(maps[-1].w.shape[1] for _, _, maps in self.scales)

    def __call__(self, points: PointSet) -> PointSet:
        coords = as_tensor(points.coords)
        n = coords.shape[0]
        if self.s > n:
            raise InvalidArgument(f"set abstraction: s={self.s} exceeds N={n}")
        cent = fps_select(coords.data, self.s, seed_index=canonical_fps_seed(coords.data))
        cent_co = take_rows(coords, cent)
        outs = []
        for radius, cap, maps in self.scales:
            groups = ball_query(coords.data, cent, radius, cap)
            member_co = take_rows(coords, groups)  # (s, cap, C)
            offsets = member_co - cent_co.reshape(self.s, 1, coords.shape[1])
            h = offsets
            for lin in maps:
                h = leaky_relu(lin(h), self.alpha)
            outs.append(h.max(axis=1))  # channelwise max over the group
        return PointSet(coords=cent_co, feats=concat(outs, axis=-1))

    def parameters(self) -> list[Tensor]:
        out = []
        for _, _, maps in self.scales:
            for lin in maps:
                out += lin.parameters()
        return out
