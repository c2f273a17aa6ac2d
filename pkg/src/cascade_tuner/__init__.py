"""Threshold tuning and evaluation for LLM cascades with abstention."""

from .cascade import (
    Architecture,
    CascadeSpec,
    Decision,
    ModelProfile,
    PerformanceVector,
    QueryRecord,
    RouteOutcome,
    ThresholdVector,
    dominates,
    empirical_loss,
    evaluate_empirical,
    pareto_front,
    route,
    validate_thresholds,
)
from .calibration import (
    CalibrationModel,
    apply_calibration,
    brier_score,
    fit_calibration,
    transform_raw,
)
from .density import (
    BetaMixture,
    MarkovJointModel,
    PairCopula,
    conditional_interval_prob,
    fit_beta_mixture,
    fit_markov_model,
    fit_pair_copula,
    interval_prob,
    load_model,
    partial_expectation,
    sample_joint,
    save_model,
)
from .metrics import (
    AnalyticPerformance,
    analytic_loss,
    analytic_performance,
    loss_gradient,
)
from .optimizer import (
    ArchitectureComparison,
    OptimizerOptions,
    PreferenceGrid,
    SweepCell,
    SweepResult,
    brute_force_oracle,
    compare_architectures,
    default_preference_grid,
    optimize_thresholds,
    smooth_threshold_grid,
    sweep_preference_grid,
)
from .abstention import (
    AbstentionClassifier,
    AbstentionLabeling,
    PRCurve,
    cost_savings_estimate,
    fit_abstention_classifier,
    label_abstentions,
    precision_recall,
)
from .dataio import (
    SchemaMode,
    ScoreDataset,
    Split,
    generate_synthetic,
    load_cascade_config,
    load_dataset,
    save_dataset,
    split_dataset,
)

__version__ = "0.1.0"
