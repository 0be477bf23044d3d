"""Simulation engine and cost analytics for iterative high-recall review."""

from .corpus import (
    CategoryLabels,
    Document,
    LabeledCollection,
    TokenizerConfig,
    load_category_groups,
    load_corpus,
    load_labels,
    tokenize,
)
from .features import (
    SparseMatrix,
    bm25_weight,
    encode_bm25,
    load_sparse_vectors,
    matrix_stats,
    prune_top_s,
)
from .classifier import LogRegModel, TrainConfig, gradient, predict_proba, train
from .sampling import BatchRequest, select_random, select_relevance, select_uncertainty
from .workflow import (
    RunConfig,
    RunRecord,
    fuse_scores,
    rank_depth_to_target,
    run_tar,
    select_seeds,
)
from .cost import (
    EXPENSIVE_TRAINING,
    UNIFORM_COST,
    CostStructure,
    cost_dynamics_table,
    iteration_cost,
    optimal_cost,
    relative_cost,
)

__version__ = "0.1.0"
