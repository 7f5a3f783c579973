"""Quantify how much group-fairness metrics disagree about one verification model."""

__version__ = "0.1.0"

from .disagreement import (
    BootstrapInterval,
    DisagreementResult,
    MetricMatrix,
    ModelComparison,
    SweepEntry,
    SweepSeries,
    bootstrap_fdi,
    compare_models,
    fdi,
    normalize,
    rank_disagreement,
    sweep,
    value_disagreement,
)
from .errors import (
    ConfigError,
    FairnessError,
    InputFormatError,
    InsufficientGroupsError,
    PartitionError,
    UndefinedRateError,
)
from .grouping import GroupPartition, PairGroupAssignment, assign_pairs, intersect_partitions, proxy_partition
from .metrics import (
    DisparitySummary,
    GroupMetricsTable,
    ValidityPolicy,
    disparities,
    group_metrics,
    group_score_divergences,
    wasserstein_1d,
)
from .verification import (
    ConfusionCounts,
    Embedding,
    LabeledScore,
    PairProtocol,
    ThresholdGrid,
    build_pairs,
    confusion_at,
    cosine_similarity,
    rates,
)
