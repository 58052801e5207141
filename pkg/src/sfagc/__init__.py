"""Structure-fused attention graph convolution for point clouds.

A small float64 library: a tape-based autodiff core, brute-force
neighborhood construction, the attention-based graph convolution layer
with structural feature aggregation, graph pooling, and complete
classification / segmentation networks trainable at desk scale.
"""

from .autodiff import (
    Adam,
    AdamState,
    Linear,
    Tensor,
    adam_step,
    backward,
    broadcast_to,
    concat,
    cosine_similarity,
    dropout,
    finite_diff_grad,
    leaky_relu,
    log_softmax,
    matmul,
    no_grad,
    softmax,
    take_rows,
    uniform_init,
)
from .errors import (
    CheckpointError,
    InvalidArgument,
    ParseError,
    SfagcError,
    ShapeError,
)
from .graphs import (
    KnnGraph,
    PointSet,
    ball_query,
    build_knn_graph,
    fps_select,
    pairwise_sq_dists,
    rank_topk,
)
from .layer import SfagcConfig, SfagcLayer, SfagcParams, init_params, sfagc_forward
from .models import (
    Network,
    NetworkSpec,
    PhaseOutputs,
    ablation_variant,
    cross_entropy,
    hierarchical_loss,
    mean_class_accuracy,
    mean_iou,
    overall_accuracy,
    spec_by_name,
)
from .pooling import (
    FpsPoolLayer,
    PropagationLayer,
    ScorePoolLayer,
    SetAbstractionLayer,
    canonical_fps_seed,
    interpolation_weights,
)
from .structure import StructureParams, structure_pass

__version__ = "0.1.0"
