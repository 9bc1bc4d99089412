"""Reflexive regular equivalence for bipartite data."""
from .baselines import PairwiseSimilarity, cosine_similarity, jaccard_similarity, pearson_similarity
from .engine import (
    ConvergenceTrace,
    ReflexiveSimilarity,
    RunConfig,
    SimilarityPair,
    initialize_similarity,
    reflexive_similarity,
    stopping_rule,
    update_similarity,
)
from .evaluation import (
    EvalCurve,
    mu_score,
    noise_sweep,
    null_model_curve,
    permutation_recovery,
    precision_at_rank,
    scaling_benchmark,
)
from .matrix import NormKind, apply_permutation, frobenius_norm, matrix_vector_norm, row_normalize
from .synthgen import BlockSpec, GroundTruth, add_gaussian_noise, generate_blocks, permute_randomly

__version__ = "0.1.0"
