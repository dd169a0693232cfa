"""rangekit: a desk-scale metric-learning training kit.

The loss under study penalizes, per identity in a mini-batch, the
harmonic mean of the k largest squared pairwise embedding distances (the
class "ranges") and, across identities, hinges on the squared distance
between the two closest class centers. Trained jointly with softmax
cross-entropy on synthetic long-tailed data, it is compared against
softmax-only, contrastive, and triplet baselines in terms of embedding
geometry and verification accuracy.
"""

from .geometry import (
    CenterPair,
    DegenerateGroupError,
    EmbeddingBatch,
    RangeStat,
    class_center,
    min_center_pair,
    pairwise_sq_distances,
    top_k_ranges,
)
from .losses import (
    LossResult,
    RangeLossConfig,
    contrastive_loss,
    finite_difference_grad,
    inter_range_loss,
    intra_range_loss,
    range_loss,
    relative_gradient_error,
    softmax_xent,
    triplet_loss,
)
from .network import (
    ForwardCache,
    MlpParams,
    MlpShape,
    SgdConfig,
    backward,
    forward,
    init_params,
    learning_rate,
    sgd_step,
)
from .data import (
    BatchSpec,
    DatasetSpec,
    LongTailDataset,
    generate,
    heldout_resample,
    load_dataset,
    pk_batches,
    save_dataset,
    truncate_tail,
    verification_pairs,
)
from .trainer import (
    MetricsRecord,
    TrainConfig,
    TrainResult,
    TrainingAborted,
    evaluate_verification,
    geometry_metrics,
    load_checkpoint,
    save_checkpoint,
    train,
    train_step,
)

__version__ = "0.1.0"
