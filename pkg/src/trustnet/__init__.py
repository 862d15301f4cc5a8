"""trustnet: joint user embeddings and trust prediction on directed trust graphs."""

__version__ = "0.1.0"

from .errors import DataError, NumericError, ParseError, SamplingError, TrustNetError
from .graph import (
    EdgeSplit,
    TrustGraph,
    build_graph,
    degree_class,
    load_graph,
    parse_edge_list,
    sample_negative_pair,
    sample_negative_pairs,
    split_edges,
)
from .model import (
    Batch,
    Gradients,
    ModelParams,
    TrainConfig,
    TrainResult,
    TrustModel,
    backward,
    batch_loss,
    compute_features,
    forward,
    forward_batch,
    load_model,
    make_epoch_batches,
    predict,
    save_model,
    sgd_step,
    simple_nn_forward,
    train,
)
from .deepwalk import (
    WalkConfig,
    WalkCorpus,
    export_embeddings,
    generate_walks,
    import_embeddings,
    skipgram_train,
)
from .evaluation import (
    MetricReport,
    accuracy_without_negatives,
    fscore_with_negatives,
    make_synthetic_block_graph,
    make_synthetic_two_community_graph,
    segment_report,
    segment_test_pairs,
)
from .numerics import (
    affine,
    finite_diff_gradient,
    init_glorot,
    init_uniform_embedding,
    make_rng,
    sigmoid,
    softmax,
    tanh_vec,
)
