"""Joint contrastive representation learning and hyperbolic hierarchical clustering.

Points live in the two-dimensional Poincare disk. A continuous relaxation of
Dasgupta's cost over triplets is minimized by gradient descent, and a rooted
binary tree is decoded by agglomerating pairs by hyperbolic LCA depth.
"""

from .errors import (
    ConfigError,
    ContractViolation,
    HyphcError,
    InvalidInputError,
    NonFiniteLossError,
    ParseError,
    UndefinedMetricError,
)
from .geometry import (
    lca_depth,
    lca_depth_gradient,
    pairwise_lca_depth,
    poincare_distance,
    project_to_disk,
)
from .hyp_hc import HcLossConfig, hc_loss, hc_loss_backward, triplet_similarity
from .nn import (
    AugmentationConfig,
    EncoderModel,
    GenericContrastive,
    NTXent,
    augment,
    backward,
    contrastive_loss,
    forward,
    init_encoder,
)
from .similarity import SimilarityGraph, build_similarity, sample_triplets
from .train import AdamState, RunRecord, TrainConfig, adam_step, fit, fit_embeddings, joint_loss
from .tree import (
    Dendrogram,
    dasgupta_cost,
    decode,
    dendrogram_purity,
    from_newick,
    to_dot,
    to_newick,
)

__version__ = "0.1.0"
