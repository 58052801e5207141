"""Latent structural features of local neighborhoods.

For every node v with neighbors u, the coordinate offsets co_u - co_v are
summarized by a learned base vector; each neighbor then contributes a
structure encoding weighted by how well its offset aligns with that base
direction.  The projection-aggregated result is fused with the node's own
feature to produce a structure-aware feature.

Shapes are batched over nodes: offsets are (N, k, C), per-node results
(N, ...).  Single-node inputs (k, C) work the same way through numpy
broadcasting rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Linear,
    Tensor,
    as_tensor,
    broadcast_to,
    concat,
    cosine_similarity,
    leaky_relu,
    take_rows,
)
from .errors import ShapeError
from .graphs import KnnGraph

__all__ = [
    "StructureParams",
    "structure_vectors",
    "base_structure_vector",
    "feature_angle",
    "feature_distance",
    "relational_embedding",
    "structure_encoding",
    "projection_aggregate",
    "fuse_structure",
]


@dataclass
class StructureParams:
    """Weights of the structural-feature pass.

    base:     C -> C map whose activated outputs average into the base vector
    relation: C -> R per-offset relational embedding
    encode:   (C + R) -> E second-stage encoding of [distance, relation]
    fuse:     (D + C + R + E) -> F map joining node feature and aggregate
    """

    base: Linear
    relation: Linear
    encode: Linear
    fuse: Linear
    alpha: float = 0.2

    def parameters(self):
        return (
            self.base.parameters()
            + self.relation.parameters()
            + self.encode.parameters()
            + self.fuse.parameters()
        )


def structure_vectors(coords, graph: KnnGraph) -> Tensor:
    """Offsets co_u - co_v for each node v and neighbor u, shape (N, k, C)."""
    co = as_tensor(coords)
    if co.ndim != 2 or co.shape[0] != graph.n:
        raise ShapeError(
            f"structure_vectors: coords {co.shape} do not match graph over {graph.n} nodes"
        )
    co_u = take_rows(co, graph.neighbors)
    co_v = co.reshape(co.shape[0], 1, co.shape[1])
    return co_u - co_v


def base_structure_vector(sv: Tensor, params: StructureParams) -> Tensor:
    """Average of activated per-offset projections: the neighborhood's
    dominant latent direction, shape (..., C)."""
    return leaky_relu(params.base(sv), params.alpha).mean(axis=-2)


def feature_angle(sv: Tensor, sv_base: Tensor) -> Tensor:
    """Cosine between each offset and the base vector, in [-1, 1].

    sv is (..., k, C); sv_base is (..., C) and broadcasts across k.
    Degenerate offsets (zero norm) score 0.
    """
    sv = as_tensor(sv)
    sv_base = as_tensor(sv_base)
    expanded = sv_base.reshape(*sv_base.shape[:-1], 1, sv_base.shape[-1])
    return cosine_similarity(sv, broadcast_to(expanded, sv.shape), axis=-1)


def feature_distance(co_u, co_v) -> Tensor:
    """Elementwise absolute coordinate difference |co_u - co_v|, axis-aligned
    distances rather than a scalar norm."""
    return (as_tensor(co_u) - as_tensor(co_v)).abs()


def relational_embedding(sv: Tensor, params: StructureParams) -> Tensor:
    """Activated linear embedding of each offset, shape (..., k, R)."""
    return leaky_relu(params.relation(sv), params.alpha)


def structure_encoding(fd: Tensor, re: Tensor, params: StructureParams) -> Tensor:
    """Per-neighbor structure vector s = [fd, re, act(encode([fd, re]))]."""
    first = concat([fd, re], axis=-1)
    second = leaky_relu(params.encode(first), params.alpha)
    return concat([fd, re, second], axis=-1)


def projection_aggregate(fa: Tensor, s: Tensor) -> Tensor:
    """Sum of structure encodings scaled by their feature angles.

    fa is (..., k), s is (..., k, S); the angle acts as a signed projection
    weight, so neighbors aligned with the base direction dominate.
    """
    fa = as_tensor(fa)
    s = as_tensor(s)
    if fa.shape != s.shape[:-1]:
        raise ShapeError(f"projection_aggregate: fa {fa.shape} does not match s {s.shape}")
    weighted = s * fa.reshape(*fa.shape, 1)
    return weighted.sum(axis=-2)


def fuse_structure(feats, aggregate: Tensor, params: StructureParams) -> Tensor:
    """Join each node's feature with its structural aggregate: act(fuse([h, af]))."""
    joined = concat([as_tensor(feats), aggregate], axis=-1)
    return leaky_relu(params.fuse(joined), params.alpha)


def structure_pass(coords, feats, graph: KnnGraph, params: StructureParams) -> Tensor:
    """Full structural-feature update: every node's feature becomes
    structure-aware, shape (N, F).  Convenience composition of the ops above."""
    co = as_tensor(coords)
    co_u = take_rows(co, graph.neighbors)
    co_v = co.reshape(co.shape[0], 1, co.shape[1])
    sv = co_u - co_v
    sv_base = base_structure_vector(sv, params)
    fa = feature_angle(sv, sv_base)
    fd = feature_distance(co_u, co_v)
    re = relational_embedding(sv, params)
    s = structure_encoding(fd, re, params)
    af = projection_aggregate(fa, s)
    return fuse_structure(feats, af, params)
