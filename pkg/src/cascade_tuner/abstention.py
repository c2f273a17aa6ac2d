"""Predicting the final model's abstention from upstream confidence signals.

The final model abstains on queries whose confidence falls below a
quantile threshold. A logistic classifier on the transformed raw signals
of the earlier models tries to anticipate that decision; its
precision-recall trade-off against the trivial random baseline (the
abstention rate itself) quantifies how much of the final model's cost can
be saved by abstaining early.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .calibration import fit_logistic, transform_raw
from .errors import DegenerateFitError


@dataclass(frozen=True)
class AbstentionLabeling:
    """Quantile-thresholded abstention decisions for the final model."""

    target_rate: float
    xi_k: float
    labels: tuple[bool, ...]

    @property
    def realized_rate(self) -> float:
        return sum(self.labels) / len(self.labels)


@dataclass(frozen=True)
class AbstentionClassifier:
    """Logistic model on transformed upstream signals."""

    intercept: float
    coefficients: tuple[float, ...]

    def scores(self, upstream_raw: np.ndarray) -> np.ndarray:
        feats = transform_raw(np.asarray(upstream_raw, dtype=float))
        return expit(self.intercept + feats @ np.array(self.coefficients))


@dataclass(frozen=True)
class PRCurve:
    """Precision-recall points swept over classifier score thresholds.

    Points are stored in order of decreasing threshold, so recall is
    nondecreasing along the list. baseline is the positive rate: the
    precision of a random abstention predictor.
    """

    points: tuple[tuple[float, float, float], ...]  # (recall, precision, threshold)
    baseline: float

    def __post_init__(self):
        if not 0.0 < self.baseline < 1.0:
            raise ValueError(f"baseline {self.baseline} outside (0, 1)")
        recalls = [r for r, _, _ in self.points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ValueError("recalls must be nondecreasing along the stored order")

    def precision_at_recall(self, recall: float) -> float:
        """Precision at the first operating point achieving the given recall."""
        for r, p, _ in self.points:
            if r >= recall:
                return p
        return self.points[-1][1]

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "points": [
                {"recall": r, "precision": p, "threshold": t} for r, p, t in self.points
            ],
        }


def label_abstentions(final_confidences, target_rate: float) -> AbstentionLabeling:
    """Label the lower target_rate fraction of confidences as abstentions.

    The threshold is the (floor(target * n) + 1)-th smallest confidence and
    a query abstains strictly below it, so with distinct values the
    realized rate is the closest achievable at or below the target.
    """
    conf = np.asarray(final_confidences, dtype=float)
    n = conf.size
    if not 0.0 < target_rate < 1.0:
        raise ValueError(f"target rate {target_rate} outside (0, 1)")
    if n < 10:
        raise ValueError(f"need at least 10 confidences, got {n}")
    if np.ptp(conf) == 0.0:
        raise DegenerateFitError(
            "constant confidences: the abstention quantile cannot separate queries"
        )
    order_stat = int(math.floor(target_rate * n))  # 0-indexed order statistic
    xi_k = float(np.sort(conf)[order_stat])
    labels = conf < xi_k
    return AbstentionLabeling(
        target_rate=float(target_rate), xi_k=xi_k, labels=tuple(bool(b) for b in labels)
    )


def fit_abstention_classifier(
    upstream_raw, labeling: AbstentionLabeling
) -> AbstentionClassifier:
    """Fit the logistic abstention predictor on transformed upstream signals.

    upstream_raw is (n, k-1): one raw confidence column per model ahead of
    the final one. Same fitting contract as the calibration fitter.
    """
    X = np.atleast_2d(np.asarray(upstream_raw, dtype=float))
    if X.ndim == 2 and X.shape[0] == 1 and len(labeling.labels) > 1:
        X = X.T
    y = np.array(labeling.labels, dtype=bool)
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} feature rows vs {y.size} labels")
    feats = transform_raw(X)
    intercept, coef = fit_logistic(feats, y)
    return AbstentionClassifier(intercept=intercept, coefficients=tuple(float(c) for c in coef))


def precision_recall(
    classifier: AbstentionClassifier, upstream_raw_test, labels_test
) -> PRCurve:
    """Sweep the score threshold over all distinct test scores.

    At each threshold the classifier predicts abstention for scores >= it.
    Precision at zero predicted positives is defined as 1.0 (the curve
    endpoint convention); the all-positive end has recall exactly 1 and
    precision exactly the baseline.
    """
    y = np.asarray(labels_test, dtype=bool)
    if not y.any():
        raise ValueError("test labels contain no positives")
    scores = classifier.scores(np.asarray(upstream_raw_test, dtype=float))
    if scores.ndim != 1 or scores.size != y.size:
        raise ValueError(f"{scores.size} scores vs {y.size} labels")
    n_pos = int(y.sum())
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(y[order])
    pred = np.arange(1, y.size + 1)
    # operating points: the last index of each run of equal scores
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    idx = np.concatenate([distinct, [y.size - 1]])
    points = [
        (float(tp[i] / n_pos), float(tp[i] / pred[i]), float(sorted_scores[i]))
        for i in idx
    ]
    return PRCurve(points=tuple(points), baseline=float(n_pos / y.size))


def cost_savings_estimate(
    abstention_rate: float,
    recall: float,
    precision: float,
    cost_ratio_small_over_full: float,
) -> tuple[float, float]:
    """Total-cost factor and new abstention rate from early-abstention use.

    Early abstention fires on the correctly anticipated abstentions
    (rate * recall of all queries) plus the false alarms implied by the
    precision; each such query costs cost_ratio times the full cascade.
    Returns (total_cost_factor, new_abstention_rate).
    """
    for name, v in (
        ("abstention_rate", abstention_rate),
        ("recall", recall),
        ("precision", precision),
        ("cost_ratio_small_over_full", cost_ratio_small_over_full),
    ):
        if not 0.0 < v <= 1.0:
            raise ValueError(f"{name} = {v} outside (0, 1]")
    correct_early = abstention_rate * recall
    incorrect_early = correct_early * (1.0 - precision) / precision
    early_fraction = correct_early + incorrect_early
    if early_fraction > 1.0 + 1e-12:
        # more predicted abstentions than queries: the triple is inconsistent
        raise ValueError(
            f"abstention_rate * recall / precision = {early_fraction} exceeds 1; "
            "no classifier can produce this operating point"
        )
    total_cost_factor = (1.0 - early_fraction) + early_fraction * cost_ratio_small_over_full
    new_abstention_rate = abstention_rate + incorrect_early
    return total_cost_factor, new_abstention_rate
