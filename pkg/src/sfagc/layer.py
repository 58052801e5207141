"""Attention-based spatial graph convolution over point neighborhoods.

One layer invocation:

1. builds a k-NN graph in the layer's input coordinate space,
2. runs the structural-feature pass so every node feature becomes
   structure-aware (see structure.py),
3. attends over each node's neighbors with two complementary similarity
   terms (a subtraction form and a scalar dot-production form, summed
   with a learned position embedding of the coordinate offset),
4. aggregates neighbor values with the attention weights and updates the
   node feature from [original feature, coordinates, aggregate], and
5. optionally updates the coordinates themselves through a small MLP, so
   deeper layers operate in a learned space and build different graphs.

Ablation flags disable individual ingredients while keeping every
downstream width intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Linear, Tensor, as_tensor, concat, leaky_relu, softmax, take_rows
from .errors import InvalidArgument, ShapeError
from .graphs import KnnGraph, PointSet, build_knn_graph
from .structure import (
    StructureParams,
    base_structure_vector,
    feature_angle,
    feature_distance,
    projection_aggregate,
    relational_embedding,
    structure_encoding,
)
from .structure import fuse_structure as _fuse

__all__ = [
    "SfagcConfig",
    "SfagcParams",
    "SfagcLayer",
    "position_embedding",
    "attention_logits",
    "attention_weights",
    "weighted_sum_aggregate",
    "update_features",
    "update_coordinates",
    "sfagc_forward",
]


@dataclass
class SfagcConfig:
    """Widths, neighborhood size, and ablation switches for one layer.

    c_in/f_in are the input coordinate/feature widths, c_out/f_out the
    output ones.  coord_update "identity" passes coordinates through
    (c_out must equal c_in); "mlp" learns a two-layer map.  The optional
    dims (relation_dim, encode_dim, att_dim, ...) default to the
    conventional choices and rarely need touching.
    """

    c_in: int
    f_in: int
    f_out: int
    k: int
    c_out: int | None = None
    coord_update: str = "identity"
    use_structure: bool = True
    use_position: bool = True
    use_dot: bool = True
    use_sub: bool = True
    relation_dim: int | None = None  # defaults to c_in
    encode_dim: int | None = None  # defaults to c_in
    att_dim: int | None = None  # defaults to f_out
    att_hidden: int | None = None  # defaults to att_dim
    pos_hidden: int | None = None  # defaults to att_dim
    alpha: float = 0.2
    bias: bool = False

    def __post_init__(self):
        if self.c_out is None:
            self.c_out = self.c_in
        if self.relation_dim is None:
            self.relation_dim = self.c_in
        if self.encode_dim is None:
            self.encode_dim = self.c_in
        if self.att_dim is None:
            self.att_dim = self.f_out
        if self.att_hidden is None:
            self.att_hidden = self.att_dim
        if self.pos_hidden is None:
            self.pos_hidden = self.att_dim
        if self.coord_update not in ("identity", "mlp"):
            raise InvalidArgument(f"coord_update must be identity or mlp, got {self.coord_update!r}")
        if self.coord_update == "identity" and self.c_out != self.c_in:
            raise InvalidArgument(
                f"identity coordinate update cannot change width {self.c_in} -> {self.c_out}"
            )
        if not (self.use_dot or self.use_sub):
            raise InvalidArgument("at least one of use_dot/use_sub must stay enabled")
        for name in ("c_in", "f_in", "f_out", "k", "c_out"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")


@dataclass
class SfagcParams:
    """Every learnable map of one layer, grouped by stage."""

    structure: StructureParams | None
    bypass: Linear | None  # replaces the structure pass when disabled
    pos_embed_1: Linear
    pos_embed_2: Linear
    query_sub: Linear
    key_sub: Linear
    query_dot: Linear
    key_dot: Linear
    dot_lift: Linear
    attn_hidden: Linear
    attn_out: Linear
    value: Linear
    update: Linear
    coord_mlp_1: Linear | None
    coord_mlp_2: Linear | None

    def parameters(self) -> list[Tensor]:
        out: list[Tensor] = []
        if self.structure is not None:
            out += self.structure.parameters()
        if self.bypass is not None:
            out += self.bypass.parameters()
        for lin in (
            self.pos_embed_1,
            self.pos_embed_2,
            self.query_sub,
            self.key_sub,
            self.query_dot,
            self.key_dot,
            self.dot_lift,
            self.attn_hidden,
            self.attn_out,
            self.value,
            self.update,
            self.coord_mlp_1,
            self.coord_mlp_2,
        ):
            if lin is not None:
                out += lin.parameters()
        return out


def init_params(cfg: SfagcConfig, rng: np.random.Generator, prefix: str = "") -> SfagcParams:
    """Draw every weight of a layer, uniform +-sqrt(1/fan_in), in a fixed order."""
    c, d, f, a = cfg.c_in, cfg.f_in, cfg.f_out, cfg.att_dim
    r, e = cfg.relation_dim, cfg.encode_dim
    b = cfg.bias

    def lin(d_in, d_out, name):
        return Linear(rng, d_in, d_out, prefix + name, bias=b)

    structure = bypass = None
    if cfg.use_structure:
        structure = StructureParams(
            base=lin(c, c, "base"),
            relation=lin(c, r, "relation"),
            encode=lin(c + r, e, "encode"),
            fuse=lin(d + c + r + e, f, "fuse"),
            alpha=cfg.alpha,
        )
    else:
        bypass = lin(d, f, "bypass")
    mlp1 = mlp2 = None
    if cfg.coord_update == "mlp":
        mlp1 = lin(c, cfg.c_out, "coord_mlp_1")
        mlp2 = lin(cfg.c_out, cfg.c_out, "coord_mlp_2")
    return SfagcParams(
        structure=structure,
        bypass=bypass,
        pos_embed_1=lin(c, cfg.pos_hidden, "pos_embed_1"),
        pos_embed_2=lin(cfg.pos_hidden, a, "pos_embed_2"),
        query_sub=lin(f, a, "query_sub"),
        key_sub=lin(f, a, "key_sub"),
        query_dot=lin(f, a, "query_dot"),
        key_dot=lin(f, a, "key_dot"),
        dot_lift=lin(1, a, "dot_lift"),
        attn_hidden=lin(a, cfg.att_hidden, "attn_hidden"),
        attn_out=lin(cfg.att_hidden, 1, "attn_out"),
        value=lin(f, a, "value"),
        update=lin(d + c + a, f, "update"),
        coord_mlp_1=mlp1,
        coord_mlp_2=mlp2,
    )


# ---------------------------------------------------------------------------
# attention-stage ops


def position_embedding(offsets: Tensor, params: SfagcParams, alpha: float = 0.2) -> Tensor:
    """Two-layer embedding of coordinate offsets into the attention space.

    Without biases a zero offset embeds to exactly zero, so coincident
    neighbors carry no positional signal.
    """
    hidden = leaky_relu(params.pos_embed_1(offsets), alpha)
    return params.pos_embed_2(hidden)


def attention_logits(h_center: Tensor, h_neighbors: Tensor, pos: Tensor | None, params: SfagcParams, cfg: SfagcConfig) -> Tensor:
    """Per-neighbor pre-activation attention vectors qk, shape (N, k, A).

    Sum of up to three terms: the subtraction form (query of the center
    minus key of each neighbor), the scalar dot-production form lifted to
    width A by a learned map, and the position embedding.
    """
    n, k = h_neighbors.shape[0], h_neighbors.shape[1]
    qk: Tensor | None = None
    if cfg.use_sub:
        q = params.query_sub(h_center)
        key = params.key_sub(h_neighbors)
        qk = q.reshape(n, 1, cfg.att_dim) - key
    if cfg.use_dot:
        q = params.query_dot(h_center).reshape(n, 1, -1)
        key = params.key_dot(h_neighbors)
        dots = (q * key).sum(axis=-1, keepdims=True)  # (N, k, 1)
        lifted = params.dot_lift(dots)
        qk = lifted if qk is None else qk + lifted
    if cfg.use_position and pos is not None:
        qk = pos if qk is None else qk + pos
    return qk


def attention_weights(qk: Tensor, params: SfagcParams, cfg: SfagcConfig) -> Tensor:
    """Softmax attention over each node's k neighbors, shape (N, k).

    Logits come from a two-layer scoring of qk, scaled down by
    sqrt(hidden width) before the (max-subtracted) softmax.  Rows are
    nonnegative and sum to one; k = 1 gives exactly [1.0].
    """
    hidden = leaky_relu(params.attn_hidden(qk), cfg.alpha)
    logits = params.attn_out(hidden)
    logits = logits.reshape(logits.shape[0], logits.shape[1])
    return softmax(logits, axis=1, scale=math.sqrt(cfg.att_hidden))


def weighted_sum_aggregate(at: Tensor, h_neighbors: Tensor, pos: Tensor | None, params: SfagcParams) -> Tensor:
    """Attention-weighted sum of neighbor values (plus position), (N, A)."""
    values = params.value(h_neighbors)
    if pos is not None:
        values = values + pos
    weighted = values * at.reshape(at.shape[0], at.shape[1], 1)
    return weighted.sum(axis=1)


def update_features(feats: Tensor, coords: Tensor, aggregate: Tensor, params: SfagcParams, alpha: float = 0.2) -> Tensor:
    """New node features from [input feature, coordinates, aggregate]."""
    joined = concat([feats, coords, aggregate], axis=-1)
    return leaky_relu(params.update(joined), alpha)


def update_coordinates(coords: Tensor, params: SfagcParams, cfg: SfagcConfig) -> Tensor:
    """Pass coordinates through unchanged or through the learned MLP."""
    if cfg.coord_update == "identity":
        return coords
    hidden = leaky_relu(params.coord_mlp_1(coords), cfg.alpha)
    return params.coord_mlp_2(hidden)


# ---------------------------------------------------------------------------
# the layer


def sfagc_forward(points: PointSet, params: SfagcParams, cfg: SfagcConfig) -> PointSet:
    """One full layer application; returns updated coordinates and features.

    The k-NN graph is built fresh from the input coordinates on every
    call, so stacked layers each operate on their own graph.
    """
    coords = as_tensor(points.coords)
    feats = as_tensor(points.feats)
    n = coords.shape[0]
    if coords.shape[1] != cfg.c_in or feats.shape[1] != cfg.f_in:
        raise ShapeError(
            f"sfagc_forward: input widths {coords.shape[1]}/{feats.shape[1]} "
            f"do not match config {cfg.c_in}/{cfg.f_in}"
        )
    graph = build_knn_graph(coords.data, cfg.k)

    co_u = take_rows(coords, graph.neighbors)  # (N, k, C)
    co_v = coords.reshape(n, 1, cfg.c_in)
    offsets = co_u - co_v

    # structural-feature pass: h -> structure-aware h'
    if cfg.use_structure:
        sp = params.structure
        sv_base = base_structure_vector(offsets, sp)
        fa = feature_angle(offsets, sv_base)
        fd = feature_distance(co_u, co_v)
        re = relational_embedding(offsets, sp)
        s = structure_encoding(fd, re, sp)
        af = projection_aggregate(fa, s)
        h_prime = _fuse(feats, af, sp)
    else:
        h_prime = params.bypass(feats)

    # attention over neighbors in the structure-aware feature space
    h_prime_u = take_rows(h_prime, graph.neighbors)  # (N, k, F)
    pos = position_embedding(offsets, params, cfg.alpha) if cfg.use_position else None
    qk = attention_logits(h_prime, h_prime_u, pos, params, cfg)
    at = attention_weights(qk, params, cfg)
    aggregate = weighted_sum_aggregate(at, h_prime_u, pos, params)

    new_feats = update_features(feats, coords, aggregate, params, cfg.alpha)
    new_coords = update_coordinates(coords, params, cfg)
    return PointSet(coords=new_coords, feats=new_feats)


class SfagcLayer:
    """Config + params bundle with a convenient call interface."""

    def __init__(self, cfg: SfagcConfig, rng: np.random.Generator, prefix: str = ""):
        self.cfg = cfg
        self.params = init_params(cfg, rng, prefix)

    def __call__(self, points: PointSet) -> PointSet:
        return sfagc_forward(points, self.params, self.cfg)

    def parameters(self) -> list[Tensor]:
        return self.params.parameters()
