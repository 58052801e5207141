"""Point-cloud classification and segmentation networks.

A NetworkSpec is an explicit dataflow description: an ordered list of
named blocks, each naming the earlier outputs it consumes, plus head
wiring.  Construction resolves and validates every width before any data
flows, so a malformed spec fails fast with a named block.

Classification networks are hierarchical: several phases at decreasing
resolution each feed their own prediction head, the phase losses are
summed for training, and the phase logits are summed for the final
prediction.  Segmentation networks run an encoder of convolution phases
and poolings, then decode back to full resolution with feature
propagation and score every point.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Linear, Tensor, as_tensor, concat, dropout, leaky_relu, log_softmax, take_rows
from .errors import InvalidArgument, ShapeError
from .graphs import PointSet
from .layer import SfagcConfig, SfagcLayer
from .pooling import FpsPoolLayer, PropagationLayer, ScorePoolLayer, SetAbstractionLayer

__all__ = [
    "SfagcBlock",
    "ScorePoolBlock",
    "FpsPoolBlock",
    "SubsetBlock",
    "SetAbstractionBlock",
    "PropagationBlock",
    "NetworkSpec",
    "PhaseOutputs",
    "Network",
    "cross_entropy",
    "hierarchical_loss",
    "overall_accuracy",
    "mean_class_accuracy",
    "mean_iou",
    "metrics",
    "ablation_variant",
    "ABLATION_VARIANTS",
    "toy_classification_spec",
    "toy_segmentation_spec",
    "table_classification_spec",
    "table_segmentation_spec",
    "micro_classification_spec",
    "micro_segmentation_spec",
    "spec_by_name",
]


# ---------------------------------------------------------------------------
# losses


def cross_entropy(logits: Tensor, label) -> Tensor:
    """Cross entropy from raw logits via a stable log-softmax.

    1-D logits with an integer label give one sample's loss; 2-D logits
    (N, K) with labels (N,) average over rows.
    """
    logits = as_tensor(logits)
    if logits.ndim == 1:
        label = int(label)
        if not 0 <= label < logits.shape[0]:
            raise InvalidArgument(f"cross_entropy: label {label} outside {logits.shape[0]} classes")
        ls = log_softmax(logits, axis=0)
        return -take_rows(ls, np.array([label])).sum()
    if logits.ndim == 2:
        labels = np.asarray(label)
        if not np.issubdtype(labels.dtype, np.integer):
            raise InvalidArgument(f"cross_entropy: labels must be integers, got {labels.dtype}")
        if labels.shape != (logits.shape[0],):
            raise ShapeError(
                f"cross_entropy: labels {labels.shape} do not match logits {logits.shape}"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
            raise InvalidArgument("cross_entropy: label outside class range")
        onehot = np.zeros(logits.shape)
        onehot[np.arange(labels.shape[0]), labels] = 1.0
        ls = log_softmax(logits, axis=1)
        return -(ls * Tensor(onehot)).sum() * (1.0 / logits.shape[0])
    raise ShapeError(f"cross_entropy: logits must be 1-D or 2-D, got {logits.shape}")


@dataclass
class PhaseOutputs:
    """Per-phase predictions, their summed total, and optional losses."""

    phase_logits: list
    total: Tensor
    losses: list = field(default_factory=list)


def hierarchical_loss(outputs: PhaseOutputs) -> Tensor:
    """Plain sum of the per-phase losses."""
    if not outputs.losses:
        raise InvalidArgument("hierarchical_loss: no per-phase losses present")
    total = outputs.losses[0]
    for extra in outputs.losses[1:]:
        total = total + extra
    return total


# ---------------------------------------------------------------------------
# metrics


def overall_accuracy(predictions, labels) -> float:
    """Fraction of exactly-correct predictions."""
    p, y = np.asarray(predictions), np.asarray(labels)
    if p.shape != y.shape or p.size == 0:
        raise ShapeError(f"overall_accuracy: shapes {p.shape} vs {y.shape}")
    return float((p == y).mean())


def mean_class_accuracy(predictions, labels) -> float:
    """Mean of per-class accuracies over the classes present in labels."""
    p, y = np.asarray(predictions), np.asarray(labels)
    if p.shape != y.shape or p.size == 0:
        raise ShapeError(f"mean_class_accuracy: shapes {p.shape} vs {y.shape}")
    accs = [float((p[y == c] == c).mean()) for c in np.unique(y)]
    return float(np.mean(accs))


def mean_iou(pred_parts, gt_parts, shape_categories=None, category_parts=None) -> float:
    """Mean intersection-over-union across shapes.

    Per shape, IoU is averaged over the part ids of that shape's
    category; a part absent from both the prediction and the ground
    truth counts as IoU 1.  Without explicit categories every shape
    shares one category whose parts are all labels seen in the data.
    """
    if len(pred_parts) != len(gt_parts) or not pred_parts:
        raise ShapeError("mean_iou: prediction/ground-truth shape counts differ or empty")
    if shape_categories is None:
        shape_categories = [0] * len(pred_parts)
    if category_parts is None:
        seen = set()
        for p, g in zip(pred_parts, gt_parts):
            seen |= set(np.unique(np.asarray(p)).tolist()) | set(np.unique(np.asarray(g)).tolist())
        category_parts = {0: sorted(seen)}
    per_shape = []
    for p, g, cat in zip(pred_parts, gt_parts, shape_categories):
        p, g = np.asarray(p), np.asarray(g)
        if p.shape != g.shape:
            raise ShapeError("mean_iou: prediction and label lengths differ within a shape")
        ious = []
        for part in category_parts[cat]:
            inter = float(np.sum((p == part) & (g == part)))
            union = float(np.sum((p == part) | (g == part)))
            ious.append(1.0 if union == 0.0 else inter / union)
        per_shape.append(float(np.mean(ious)))
    return float(np.mean(per_shape))


def metrics(predictions, labels, mode: str) -> float:
    """Dispatch to one of the evaluation metrics by name."""
    if mode == "oa":
        return overall_accuracy(predictions, labels)
    if mode == "macc":
        return mean_class_accuracy(predictions, labels)
    if mode == "miou":
        return mean_iou(predictions, labels)
    raise InvalidArgument(f"metrics: unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# network description blocks


@dataclass(frozen=True)
class SfagcBlock:
    """One graph-convolution layer reading the point set named by src."""

    name: str
    src: str
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


@dataclass(frozen=True)
class ScorePoolBlock:
    """Score-ranked pooling; features concatenated from feat_srcs.

    With coords_from_features (the default) the embedded convolution
    treats that concatenation as its coordinates; otherwise coords_src
    names the coordinate provider.
    """

    name: str
    feat_srcs: tuple
    t: int
    k: int
    c_out: int
    f_conv: int
    f_out: int
    coords_from_features: bool = True
    coords_src: str | None = None
    use_structure: bool = True
    use_position: bool = True
    use_dot: bool = True
    use_sub: bool = True


@dataclass(frozen=True)
class FpsPoolBlock:
    """Farthest-point pooling; the embedded convolution keeps coordinates
    (identity update), so pooled coordinates subset coords_src's."""

    name: str
    feat_srcs: tuple
    coords_src: str
    t: int
    k: int
    f_conv: int
    use_structure: bool = True
    use_position: bool = True
    use_dot: bool = True
    use_sub: bool = True


@dataclass(frozen=True)
class SubsetBlock:
    """Rows of src at the indices a pooling block selected."""

    name: str
    src: str
    pool: str


@dataclass(frozen=True)
class SetAbstractionBlock:
    """Multi-scale grouping branch; scales are (radius, cap, mlp_widths)."""

    name: str
    src: str
    s: int
    scales: tuple


@dataclass(frozen=True)
class PropagationBlock:
    """Upsample feat_srcs (one coarse node set) onto dst's nodes, mixing
    skip_srcs features that already live on dst's nodes.

    coords_src names the output providing the coarse geometry for the
    interpolation; it defaults to the first feature source and must
    match dst's coordinate width.
    """

    name: str
    feat_srcs: tuple
    dst: str
    skip_srcs: tuple
    f_out: int
    coords_src: str | None = None


@dataclass(frozen=True)
class NetworkSpec:
    """Complete network description: blocks plus head wiring.

    head_srcs lists one source per prediction phase (classification) or
    exactly one (segmentation).  num_classes counts object classes or
    segmentation parts.
    """

    task: str
    num_classes: int
    blocks: tuple
    head_srcs: tuple
    head_hidden: int
    dropout: float
    input_coord_width: int = 3
    input_feat_width: int = 3
    name: str = "custom"

    def __post_init__(self):
        if self.task not in ("classification", "segmentation"):
            raise InvalidArgument(f"NetworkSpec: unknown task {self.task!r}")
        if self.num_classes < 2:
            raise InvalidArgument("NetworkSpec: need at least 2 classes")
        if not self.head_srcs:
            raise InvalidArgument("NetworkSpec: at least one head source required")
        if self.task == "segmentation" and len(self.head_srcs) != 1:
            raise InvalidArgument("NetworkSpec: segmentation uses exactly one head source")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgument(f"NetworkSpec: dropout {self.dropout} outside [0, 1)")
        names = [b.name for b in self.blocks]
        if len(names) != len(set(names)) or "input" in names:
            raise InvalidArgument("NetworkSpec: block names must be unique and not 'input'")

    @property
    def phases(self) -> int:
        return len(self.head_srcs)


ABLATION_VARIANTS = ("full", "nS", "nP", "ndot", "nsub")

_VARIANT_FLAG = {
    "nS": "use_structure",
    "nP": "use_position",
    "ndot": "use_dot",
    "nsub": "use_sub",
}


def ablation_variant(spec: NetworkSpec, variant: str) -> NetworkSpec:
    """Copy of spec with one layer ingredient disabled in every
    convolution block (pooling-embedded ones included)."""
    if variant not in ABLATION_VARIANTS:
        raise InvalidArgument(f"ablation_variant: unknown variant {variant!r}")
    if variant == "full":
        return spec
    flag = _VARIANT_FLAG[variant]
    blocks = tuple(
        dataclasses.replace(b, **{flag: False}) if hasattr(b, flag) else b for b in spec.blocks
    )
    return dataclasses.replace(spec, blocks=blocks, name=f"{spec.name}-{variant}")


# ---------------------------------------------------------------------------
# the runnable network


def _conv_cfg(b, c_in, f_in, f_out, c_out, coord_update, k):
    return SfagcConfig(
        c_in=c_in,
        f_in=f_in,
        f_out=f_out,
        k=k,
        c_out=c_out,
        coord_update=coord_update,
        use_structure=b.use_structure,
        use_position=b.use_position,
        use_dot=b.use_dot,
        use_sub=b.use_sub,
    )


class Network:
    """A NetworkSpec instantiated with parameters, ready to run.

    Construction walks the blocks in order, tracking every output's
    coordinate/feature widths and instantiating layers; any width
    disagreement raises immediately, naming the offending block.
    """

    def __init__(self, spec: NetworkSpec, rng: np.random.Generator):
        self.spec = spec
        self.layers: dict[str, object] = {}
        widths: dict[str, tuple[int, int]] = {
            "input": (spec.input_coord_width, spec.input_feat_width)
        }
        pools: set[str] = set()

        def width_of(ref, block):
            if ref not in widths:
                raise InvalidArgument(f"block {block!r} references unknown output {ref!r}")
            return widths[ref]

        for b in spec.blocks:
            if isinstance(b, SfagcBlock):
                c, f = width_of(b.src, b.name)
                if (c, f) != (b.c_in, b.f_in):
                    raise ShapeError(
                        f"block {b.name!r}: input widths {c}/{f} do not match declared {b.c_in}/{b.f_in}"
                    )
                cfg = _conv_cfg(b, b.c_in, b.f_in, b.f_out, b.c_out, b.coord_update, b.k)
                self.layers[b.name] = SfagcLayer(cfg, rng, prefix=b.name + ".")
                widths[b.name] = (cfg.c_out, cfg.f_out)
            elif isinstance(b, ScorePoolBlock):
                f_in = sum(width_of(r, b.name)[1] for r in b.feat_srcs)
                if b.coords_from_features:
                    c_in = f_in
                else:
                    if b.coords_src is None:
                        raise InvalidArgument(f"block {b.name!r}: coords_src required")
                    c_in = width_of(b.coords_src, b.name)[0]
                cfg = _conv_cfg(b, c_in, f_in, b.f_conv, b.c_out, "mlp", b.k)
                self.layers[b.name] = ScorePoolLayer(
                    cfg,
                    b.t,
                    rng,
                    merge_width=b.f_out,
                    coords_from_features=b.coords_from_features,
                    prefix=b.name + ".",
                )
                widths[b.name] = (b.c_out, b.f_out)
                pools.add(b.name)
            elif isinstance(b, FpsPoolBlock):
                f_in = sum(width_of(r, b.name)[1] for r in b.feat_srcs)
                c_in = width_of(b.coords_src, b.name)[0]
                cfg = _conv_cfg(b, c_in, f_in, b.f_conv, c_in, "identity", b.k)
                self.layers[b.name] = FpsPoolLayer(cfg, b.t, rng, prefix=b.name + ".")
                widths[b.name] = (c_in, b.f_conv)
                pools.add(b.name)
            elif isinstance(b, SubsetBlock):
                if b.pool not in pools:
                    raise InvalidArgument(f"block {b.name!r}: {b.pool!r} is not a pooling block")
                widths[b.name] = width_of(b.src, b.name)
            elif isinstance(b, SetAbstractionBlock):
                c, _ = width_of(b.src, b.name)
                layer = SetAbstractionLayer(b.s, c, b.scales, rng, prefix=b.name + ".")
                self.layers[b.name] = layer
                widths[b.name] = (c, layer.out_width)
            elif isinstance(b, PropagationBlock):
                f_src = sum(width_of(r, b.name)[1] for r in b.feat_srcs)
                f_skip = sum(width_of(r, b.name)[1] for r in b.skip_srcs)
                c_dst = width_of(b.dst, b.name)[0]
                c_src = width_of(b.coords_src or b.feat_srcs[0], b.name)[0]
                if c_src != c_dst:
                    raise ShapeError(
                        f"block {b.name!r}: coarse coordinate width {c_src} "
                        f"!= destination width {c_dst}"
                    )
                self.layers[b.name] = PropagationLayer(
                    f_src, f_skip, b.f_out, rng, prefix=b.name + "."
                )
                widths[b.name] = (c_dst, b.f_out)
            else:
                raise InvalidArgument(f"unknown block type {type(b).__name__}")

        self.heads = []
        for i, ref in enumerate(spec.head_srcs):
            f = widths.get(ref)
            if f is None:
                raise InvalidArgument(f"head {i} references unknown output {ref!r}")
            f = f[1]
            pooled = 2 * f if spec.task == "classification" else f
            hid = Linear(rng, pooled, spec.head_hidden, f"head{i}.hidden")
            out = Linear(rng, spec.head_hidden, spec.num_classes, f"head{i}.logits")
            self.heads.append((ref, hid, out))

        self._widths = widths
        self._check_unique_names()

    def _check_unique_names(self):
        names = [p.name for p in self.parameters()]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise InvalidArgument(f"duplicate parameter names: {dupes}")

    def parameters(self) -> list[Tensor]:
        out = []
        for b in self.spec.blocks:
            layer = self.layers.get(b.name)
            if layer is not None:
                out += layer.parameters()
        for _, hid, head_out in self.heads:
            out += hid.parameters() + head_out.parameters()
        return out

    # -- running -------------------------------------------------------

    def forward(
        self,
        points: PointSet,
        label=None,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> PhaseOutputs:
        """Run the network; with a label, per-phase losses are attached.

        train=True applies head dropout and requires an rng.
        """
        if train and self.spec.dropout > 0.0 and rng is None:
            raise InvalidArgument("forward: training with dropout needs an rng")
        state: dict[str, PointSet] = {
            "input": PointSet(coords=as_tensor(points.coords), feats=as_tensor(points.feats))
        }
        pool_idx: dict[str, np.ndarray] = {}

        def cat_feats(refs):
            feats = [state[r].feats for r in refs]
            return feats[0] if len(feats) == 1 else concat(feats, axis=-1)

        for b in self.spec.blocks:
            if isinstance(b, SfagcBlock):
                state[b.name] = self.layers[b.name](state[b.src])
            elif isinstance(b, ScorePoolBlock):
                feats = cat_feats(b.feat_srcs)
                coords = feats if b.coords_from_features else state[b.coords_src].coords
                pooled = self.layers[b.name](PointSet(coords=coords, feats=feats))
                state[b.name] = PointSet(coords=pooled.coords, feats=pooled.feats)
                pool_idx[b.name] = pooled.idx_select
            elif isinstance(b, FpsPoolBlock):
                feats = cat_feats(b.feat_srcs)
                coords = state[b.coords_src].coords
                pooled = self.layers[b.name](PointSet(coords=coords, feats=feats))
                state[b.name] = PointSet(coords=pooled.coords, feats=pooled.feats)
                pool_idx[b.name] = pooled.idx_select
            elif isinstance(b, SubsetBlock):
                idx = pool_idx[b.pool]
                src = state[b.src]
                state[b.name] = PointSet(
                    coords=take_rows(src.coords, idx), feats=take_rows(src.feats, idx)
                )
            elif isinstance(b, SetAbstractionBlock):
                state[b.name] = self.layers[b.name](state[b.src])
            elif isinstance(b, PropagationBlock):
                geom = state[b.coords_src or b.feat_srcs[0]].coords
                src = PointSet(coords=geom, feats=cat_feats(b.feat_srcs))
                skip = cat_feats(b.skip_srcs) if b.skip_srcs else None
                feats = self.layers[b.name](src, state[b.dst].coords, skip)
                state[b.name] = PointSet(coords=state[b.dst].coords, feats=feats)

        phase_logits = []
        for ref, hid, out in self.heads:
            feats = state[ref].feats
            if self.spec.task == "classification":
                pooled = concat([feats.max(axis=0), feats.mean(axis=0)], axis=-1)
            else:
                pooled = feats
            h = leaky_relu(hid(pooled), 0.2)
            if train and self.spec.dropout > 0.0:
                h = dropout(h, self.spec.dropout, rng)
            phase_logits.append(out(h))

        total = phase_logits[0]
        for lg in phase_logits[1:]:
            total = total + lg

        losses = []
        if label is not None:
            losses = [cross_entropy(lg, label) for lg in phase_logits]
        return PhaseOutputs(phase_logits=phase_logits, total=total, losses=losses)

    def predict(self, points: PointSet):
        """Class id (classification) or per-point part ids (segmentation)."""
        out = self.forward(points)
        if self.spec.task == "classification":
            return int(np.argmax(out.total.data))
        return np.argmax(out.total.data, axis=1)


# ---------------------------------------------------------------------------
# concrete specs


def toy_classification_spec(num_classes: int = 4) -> NetworkSpec:
    """Two-phase classifier sized for quick desk-scale training (N=64)."""
    blocks = (
        SfagcBlock("p1l1", "input", c_in=3, f_in=3, f_out=32, k=8, c_out=16, coord_update="mlp"),
        SfagcBlock("p1l2", "p1l1", c_in=16, f_in=32, f_out=32, k=8),
        ScorePoolBlock(
            "pool1", feat_srcs=("input", "p1l1", "p1l2"), t=32, k=8, c_out=16, f_conv=32, f_out=32
        ),
        SfagcBlock("p2l1", "pool1", c_in=16, f_in=32, f_out=32, k=8, c_out=16, coord_update="mlp"),
        SfagcBlock("p2l2", "p2l1", c_in=16, f_in=32, f_out=64, k=8),
    )
    return NetworkSpec(
        task="classification",
        num_classes=num_classes,
        blocks=blocks,
        head_srcs=("p1l2", "p2l2"),
        head_hidden=64,
        dropout=0.3,
        name="toy_classify",
    )


def toy_segmentation_spec(num_classes: int = 2) -> NetworkSpec:
    """Encoder-decoder part segmenter sized for quick training (N=128)."""
    blocks = (
        SfagcBlock("p1l1", "input", c_in=3, f_in=3, f_out=32, k=8, c_out=16, coord_update="mlp"),
        SfagcBlock("p1l2", "p1l1", c_in=16, f_in=32, f_out=32, k=8),
        FpsPoolBlock(
            "poolf1", feat_srcs=("input", "p1l1", "p1l2"), coords_src="input", t=32, k=8, f_conv=48
        ),
        SfagcBlock("p2l1", "poolf1", c_in=3, f_in=48, f_out=48, k=8, c_out=16, coord_update="mlp"),
        SfagcBlock("p2l2", "p2l1", c_in=16, f_in=48, f_out=64, k=8),
        PropagationBlock(
            "fp1",
            feat_srcs=("p2l2", "poolf1"),
            dst="input",
            skip_srcs=("p1l1", "p1l2"),
            f_out=64,
            coords_src="poolf1",
        ),
    )
    return NetworkSpec(
        task="segmentation",
        num_classes=num_classes,
        blocks=blocks,
        head_srcs=("fp1",),
        head_hidden=64,
        dropout=0.4,
        name="toy_segment",
    )


def micro_classification_spec(num_classes: int = 3) -> NetworkSpec:
    """Smallest full-shape classifier (widths <= 8), for gradient checks."""
    blocks = (
        SfagcBlock("p1l1", "input", c_in=3, f_in=3, f_out=6, k=4, c_out=4, coord_update="mlp"),
        SfagcBlock("p1l2", "p1l1", c_in=4, f_in=6, f_out=6, k=4),
        ScorePoolBlock(
            "pool1", feat_srcs=("input", "p1l1", "p1l2"), t=6, k=4, c_out=4, f_conv=6, f_out=6
        ),
        SfagcBlock("p2l1", "pool1", c_in=4, f_in=6, f_out=8, k=4, c_out=4, coord_update="mlp"),
    )
    return NetworkSpec(
        task="classification",
        num_classes=num_classes,
        blocks=blocks,
        head_srcs=("p1l2", "p2l1"),
        head_hidden=8,
        dropout=0.3,
        name="micro_classify",
    )


def micro_segmentation_spec(num_classes: int = 2) -> NetworkSpec:
    """Smallest encoder-decoder segmenter, for gradient checks."""
    blocks = (
        SfagcBlock("p1l1", "input", c_in=3, f_in=3, f_out=6, k=4, c_out=4, coord_update="mlp"),
        FpsPoolBlock("poolf1", feat_srcs=("input", "p1l1"), coords_src="input", t=6, k=3, f_conv=6),
        SfagcBlock("p2l1", "poolf1", c_in=3, f_in=6, f_out=8, k=3, c_out=4, coord_update="mlp"),
        PropagationBlock(
            "fp1",
            feat_srcs=("p2l1", "poolf1"),
            dst="input",
            skip_srcs=("p1l1",),
            f_out=8,
            coords_src="poolf1",
        ),
    )
    return NetworkSpec(
        task="segmentation",
        num_classes=num_classes,
        blocks=blocks,
        head_srcs=("fp1",),
        head_hidden=8,
        dropout=0.4,
        name="micro_segment",
    )


def table_classification_spec(num_classes: int = 40) -> NetworkSpec:
    """Five-phase hierarchical classifier at full benchmark scale.

    Pool inputs concatenate the running phase outputs (and, past the
    first pooling, the previous phase's outputs at the pooled nodes);
    the multi-scale grouping branch feeds the final head.
    """
    blocks = (
        SfagcBlock("p1l1", "input", c_in=3, f_in=3, f_out=64, k=20, c_out=32, coord_update="mlp"),
        SfagcBlock("p1l2", "p1l1", c_in=32, f_in=64, f_out=64, k=20),
        ScorePoolBlock(
            "pool1", feat_srcs=("input", "p1l1", "p1l2"), t=512, k=36, c_out=32, f_conv=64, f_out=64
        ),
        SfagcBlock("p2l1", "pool1", c_in=32, f_in=64, f_out=64, k=20, c_out=64, coord_update="mlp"),
        SfagcBlock("p2l2", "p2l1", c_in=64, f_in=64, f_out=128, k=20),
        SubsetBlock("p1l1_sub", "p1l1", "pool1"),
        SubsetBlock("p1l2_sub", "p1l2", "pool1"),
        ScorePoolBlock(
            "pool2",
            feat_srcs=("p2l1", "p2l2", "p1l1_sub", "p1l2_sub"),
            t=128,
            k=64,
            c_out=64,
            f_conv=128,
            f_out=128,
        ),
        SfagcBlock("p3l1", "pool2", c_in=64, f_in=128, f_out=256, k=20, c_out=128, coord_update="mlp"),
        SfagcBlock("p3l2", "p3l1", c_in=128, f_in=256, f_out=256, k=20),
        SfagcBlock("p4l1", "pool2", c_in=64, f_in=128, f_out=128, k=20, c_out=64, coord_update="mlp"),
        SfagcBlock("p4l2", "p4l1", c_in=64, f_in=128, f_out=128, k=20),
        ScorePoolBlock(
            "pool3", feat_srcs=("pool2", "p4l1", "p4l2"), t=128, k=64, c_out=128, f_conv=128, f_out=128
        ),
        SfagcBlock("p5l1", "pool3", c_in=128, f_in=128, f_out=256, k=20, c_out=128, coord_update="mlp"),
        SfagcBlock("p5l2", "p5l1", c_in=128, f_in=256, f_out=256, k=20),
        SetAbstractionBlock(
            "msg", "input", s=512, scales=((0.2, 32, (3, 64)), (0.4, 128, (3, 64)))
        ),
    )
    return NetworkSpec(
        task="classification",
        num_classes=num_classes,
        blocks=blocks,
        head_srcs=("p1l2", "p2l2", "p3l2", "p4l2", "p5l2", "msg"),
        head_hidden=256,
        dropout=0.3,
        name="table_classify",
    )


def table_segmentation_spec(num_classes: int = 50) -> NetworkSpec:
    """Full-scale encoder-decoder part segmentation architecture.

    Pools keep the original geometry (identity coordinate update on the
    xyz subset); the decoder interpolates back up in two steps with
    encoder skips.
    """
    blocks = (
        SfagcBlock("p1l1", "input", c_in=3, f_in=3, f_out=64, k=20, c_out=32, coord_update="mlp"),
        SfagcBlock("p1l2", "p1l1", c_in=32, f_in=64, f_out=64, k=20),
        FpsPoolBlock(
            "poolf1", feat_srcs=("input", "p1l1", "p1l2"), coords_src="input", t=512, k=36, f_conv=64
        ),
        SfagcBlock("p2l1", "poolf1", c_in=3, f_in=64, f_out=64, k=20, c_out=32, coord_update="mlp"),
        SfagcBlock("p2l2", "p2l1", c_in=32, f_in=64, f_out=128, k=20),
        SubsetBlock("p1l1_sub", "p1l1", "poolf1"),
        SubsetBlock("p1l2_sub", "p1l2", "poolf1"),
        FpsPoolBlock(
            "poolf2",
            feat_srcs=("p2l1", "p2l2", "p1l1_sub", "p1l2_sub"),
            coords_src="poolf1",
            t=128,
            k=64,
            f_conv=128,
        ),
        SfagcBlock("p3l1", "poolf2", c_in=3, f_in=128, f_out=256, k=20, c_out=128, coord_update="mlp"),
        SfagcBlock("p3l2", "p3l1", c_in=128, f_in=256, f_out=256, k=20),
        PropagationBlock(
            "fp1",
            feat_srcs=("p3l1", "p3l2", "poolf2"),
            dst="poolf1",
            skip_srcs=("p2l2",),
            f_out=256,
            coords_src="poolf2",
        ),
        PropagationBlock(
            "fp2", feat_srcs=("fp1",), dst="input", skip_srcs=("p1l1", "p1l2"), f_out=128
        ),
    )
    return NetworkSpec(
        task="segmentation",
        num_classes=num_classes,
        blocks=blocks,
        head_srcs=("fp2",),
        head_hidden=128,
        dropout=0.4,
        name="table_segment",
    )


_SPECS = {
    "toy_classify": toy_classification_spec,
    "toy_segment": toy_segmentation_spec,
    "micro_classify": micro_classification_spec,
    "micro_segment": micro_segmentation_spec,
    "table_classify": table_classification_spec,
    "table_segment": table_segmentation_spec,
}


def spec_by_name(name: str, num_classes: int | None = None) -> NetworkSpec:
    if name not in _SPECS:
        raise InvalidArgument(f"unknown network spec {name!r}; choose from {sorted(_SPECS)}")
    return _SPECS[name]() if num_classes is None else _SPECS[name](num_classes)
