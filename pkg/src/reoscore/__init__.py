"""Fine-grained caption scoring: relevance, extraness, omission.

Scores candidate image captions against an image's region features and/or
reference-caption context features, all supplied as precomputed feature
packs, and measures how well those scores agree with human judgments.
"""

from .attention import AttentionConfig, ContextFeatures, attention_weights, context_features, normalized_similarity
from .errors import CorpusError, DataError, FormatError, UndefinedCorrelationError, UsageError
from .harness import (
    CaptionPair,
    CorrelationReport,
    RatedInstance,
    ValidationRecord,
    ValidationReport,
    correlation_report,
    kendall_tau,
    kendall_tau_pvalue,
    minmax_normalize,
    pairwise_accuracy,
    validate_error_identification,
)
from .metrics import (
    ErrorVectors,
    GroundTruthSet,
    Mode,
    ReoScore,
    ScoringConfig,
    error_vectors,
    extraness,
    omission,
    orthogonal_residual,
    relevance,
    score_instance,
)
from .packio import InstanceManifest, load_manifest, read_tensor, write_tensor
from .pipeline import EvaluationInstance, ScoredInstance, score_manifest
from .tensor import CovarianceEstimate, CovKind, FeatureTensor, cosine, estimate_covariance, mahalanobis

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig",
    "CaptionPair",
    "ContextFeatures",
    "CorpusError",
    "CorrelationReport",
    "CovKind",
    "CovarianceEstimate",
    "DataError",
    "ErrorVectors",
    "EvaluationInstance",
    "FeatureTensor",
    "FormatError",
    "GroundTruthSet",
    "InstanceManifest",
    "Mode",
    "RatedInstance",
    "ReoScore",
    "ScoredInstance",
    "ScoringConfig",
    "UndefinedCorrelationError",
    "UsageError",
    "ValidationRecord",
    "ValidationReport",
    "attention_weights",
    "context_features",
    "correlation_report",
    "cosine",
    "error_vectors",
    "estimate_covariance",
    "extraness",
    "kendall_tau",
    "kendall_tau_pvalue",
    "load_manifest",
    "mahalanobis",
    "minmax_normalize",
    "normalized_similarity",
    "omission",
    "orthogonal_residual",
    "pairwise_accuracy",
    "read_tensor",
    "relevance",
    "score_instance",
    "score_manifest",
    "validate_error_identification",
    "write_tensor",
]
