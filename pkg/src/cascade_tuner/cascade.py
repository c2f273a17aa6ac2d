"""Cascade domain types, routing, and empirical evaluation.

A cascade is an ordered chain of models M_1 -> ... -> M_k. Model i answers
when its confidence exceeds the deferral threshold phi_i, triggers an
abstention when confidence falls below the abstention threshold xi_i, and
defers to model i+1 otherwise. The final model has no deferral threshold:
it answers unless its confidence falls below xi_k.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ThresholdValidationError

# Minimum separation realizing the strict ordering xi_i < phi_i inside a
# closed feasible set (strict inequalities are not closed constraints).
SEPARATION = 1e-6


class Architecture(enum.Enum):
    """Where abstention is allowed to happen."""

    EARLY = "early"  # every model has its own abstention threshold
    FINAL = "final"  # only the last model may abstain (xi_1..k-1 pinned to 0)


@dataclass(frozen=True)
class ModelProfile:
    """One model in the chain: a name, a per-query expected cost, a 1-based position."""

    name: str
    expected_cost: float
    position: int

    def __post_init__(self):
        if self.expected_cost < 0:
            raise ValueError(f"model {self.name!r}: expected_cost must be >= 0")
        if self.position < 1:
            raise ValueError(f"model {self.name!r}: position must be >= 1")


@dataclass(frozen=True)
class CascadeSpec:
    """An ordered model chain plus the abstention architecture."""

    models: tuple[ModelProfile, ...]
    architecture: Architecture = Architecture.EARLY

    def __post_init__(self):
        if len(self.models) < 1:
            raise ValueError("cascade needs at least one model")
        object.__setattr__(self, "models", tuple(self.models))
        positions = [m.position for m in self.models]
        if positions != list(range(1, len(self.models) + 1)):
            raise ValueError(f"model positions must be 1..k in order, got {positions}")

    @property
    def k(self) -> int:
        return len(self.models)

    @property
    def expected_costs(self) -> tuple[float, ...]:
        return tuple(m.expected_cost for m in self.models)


@dataclass(frozen=True)
class ThresholdVector:
    """Deferral thresholds phi_1..phi_{k-1} and abstention thresholds xi_1..xi_k."""

    deferral: tuple[float, ...]
    abstention: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "deferral", tuple(float(v) for v in self.deferral))
        object.__setattr__(self, "abstention", tuple(float(v) for v in self.abstention))

    @property
    def k(self) -> int:
        return len(self.abstention)

    def as_array(self) -> np.ndarray:
        """Flat [phi_1..phi_{k-1}, xi_1..xi_k] layout, 2k-1 components."""
        return np.array(self.deferral + self.abstention, dtype=float)

    @staticmethod
    def from_array(x: Sequence[float], k: int) -> "ThresholdVector":
        x = tuple(float(v) for v in x)
        if len(x) != 2 * k - 1:
            raise ValueError(f"expected {2 * k - 1} components for k={k}, got {len(x)}")
        return ThresholdVector(deferral=x[: k - 1], abstention=x[k - 1 :])


@dataclass(frozen=True)
class QueryRecord:
    """Per-query confidences, correctness labels, and realized costs for all k models."""

    query_id: str
    confidences: tuple[float, ...]
    correct: tuple[bool, ...]
    costs: tuple[float, ...]

    def __post_init__(self):
        k = len(self.confidences)
        if not (len(self.correct) == len(self.costs) == k):
            raise ValueError(
                f"record {self.query_id!r}: confidences/correct/costs lengths differ"
            )
        for i, c in enumerate(self.confidences):
            if not 0.0 <= c <= 1.0:
                raise ValueError(
                    f"record {self.query_id!r}: confidence {i + 1} = {c} outside [0, 1]"
                )


class Decision(enum.Enum):
    ANSWERED = "answered"
    ABSTAINED = "abstained"


@dataclass(frozen=True)
class RouteOutcome:
    """What the cascade did with one query and what it cost."""

    decision: Decision
    model_index: int  # 1-based index of the deciding model
    cumulative_cost: float
    was_error: bool  # always False when abstained

    def __post_init__(self):
        if self.decision is Decision.ABSTAINED and self.was_error:
            raise ValueError("an abstained query cannot count as an error")


@dataclass(frozen=True)
class PerformanceVector:
    """(error rate, expected cost, abstention rate) for one threshold setting."""

    error: float
    cost: float
    abstention: float

    def __post_init__(self):
        for name in ("error", "cost", "abstention"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if not 0.0 <= self.error <= 1.0:
            raise ValueError(f"error {self.error} outside [0, 1]")
        if not 0.0 <= self.abstention <= 1.0:
            raise ValueError(f"abstention {self.abstention} outside [0, 1]")
        if self.cost < 0:
            raise ValueError(f"cost {self.cost} must be >= 0")
        if self.error + self.abstention > 1.0 + 1e-9:
            raise ValueError(
                f"error + abstention = {self.error + self.abstention} exceeds 1"
            )


def validate_thresholds(spec: CascadeSpec, t: ThresholdVector) -> None:
    """Raise ThresholdValidationError unless t is feasible for spec.

    Feasibility: k-1 deferral and k abstention components, all in [0, 1],
    xi_i <= phi_i - SEPARATION for i < k, and xi_1..xi_{k-1} = 0 under the
    final-model-abstention architecture.
    """
    k = spec.k
    if len(t.deferral) != k - 1:
        raise ThresholdValidationError(
            f"expected {k - 1} deferral thresholds, got {len(t.deferral)}"
        )
    if len(t.abstention) != k:
        raise ThresholdValidationError(
            f"expected {k} abstention thresholds, got {len(t.abstention)}"
        )
    for i, v in enumerate(t.deferral, start=1):
        if not 0.0 <= v <= 1.0:
            raise ThresholdValidationError(f"deferral threshold {i} = {v} outside [0, 1]")
    for i, v in enumerate(t.abstention, start=1):
        if not 0.0 <= v <= 1.0:
            raise ThresholdValidationError(
                f"abstention threshold {i} = {v} outside [0, 1]"
            )
    for i in range(k - 1):
        if t.abstention[i] > t.deferral[i] - SEPARATION:
            raise ThresholdValidationError(
                f"abstention threshold {i + 1} = {t.abstention[i]} must lie at least "
                f"{SEPARATION} below deferral threshold {i + 1} = {t.deferral[i]}"
            )
    if spec.architecture is Architecture.FINAL:
        for i in range(k - 1):
            if t.abstention[i] != 0.0:
                raise ThresholdValidationError(
                    f"final-model abstention pins abstention threshold {i + 1} to 0, "
                    f"got {t.abstention[i]}"
                )


def route(spec: CascadeSpec, t: ThresholdVector, rec: QueryRecord) -> RouteOutcome:
    """Route one query through the cascade.

    At model i < k: answer if conf > phi_i, abstain if conf < xi_i, defer
    otherwise (ties go to deferral). At model k: abstain iff conf < xi_k,
    else answer.
    """
    validate_thresholds(spec, t)
    k = spec.k
    if len(rec.confidences) != k:
        raise ValueError(f"record has {len(rec.confidences)} models, cascade has {k}")
    cost = 0.0
    for i in range(k):
        cost += rec.costs[i]
        conf = rec.confidences[i]
        if i < k - 1:
            if conf > t.deferral[i]:
                return RouteOutcome(Decision.ANSWERED, i + 1, cost, not rec.correct[i])
            if conf < t.abstention[i]:
                return RouteOutcome(Decision.ABSTAINED, i + 1, cost, False)
            continue  # xi_i <= conf <= phi_i: defer
        if conf < t.abstention[i]:
            return RouteOutcome(Decision.ABSTAINED, i + 1, cost, False)
        return RouteOutcome(Decision.ANSWERED, i + 1, cost, not rec.correct[i])
    raise AssertionError("unreachable: final model always decides")


def route_matrix(
    spec: CascadeSpec,
    t: ThresholdVector,
    confidences: np.ndarray,
    correct: np.ndarray,
    costs: np.ndarray | None = None,
) -> PerformanceVector:
    """Vectorized equivalent of routing every row and averaging the outcomes.

    confidences and correct are (n, k) arrays; costs is (n, k) or None to
    use the cascade's expected costs for every query. Agrees with
    evaluate_empirical record-by-record (tested against the scalar tracer).
    """
    validate_thresholds(spec, t)
    conf = np.asarray(confidences, dtype=float)
    corr = np.asarray(correct, dtype=bool)
    n, k = conf.shape
    if k != spec.k:
        raise ValueError(f"matrix has {k} models, cascade has {spec.k}")
    if costs is None:
        cost_mat = np.broadcast_to(np.array(spec.expected_costs), (n, k))
    else:
        cost_mat = np.asarray(costs, dtype=float)

    active = np.ones(n, dtype=bool)  # still undecided
    total_cost = np.zeros(n)
    errors = np.zeros(n, dtype=bool)
    abstained = np.zeros(n, dtype=bool)
    for i in range(k):
        total_cost[active] += cost_mat[active, i]
        ci = conf[:, i]
        if i < k - 1:
            answer = active & (ci > t.deferral[i])
            abstain = active & (ci < t.abstention[i])
        else:
            abstain = active & (ci < t.abstention[i])
            answer = active & ~abstain
        errors[answer] = ~corr[answer, i]
        abstained[abstain] = True
        active = active & ~answer & ~abstain
    return PerformanceVector(
        error=float(np.mean(errors)),
        cost=float(np.mean(total_cost)),
        abstention=float(np.mean(abstained)),
    )


def evaluate_empirical(
    spec: CascadeSpec, t: ThresholdVector, data: Sequence[QueryRecord]
) -> PerformanceVector:
    """Average routing outcomes over a dataset: (answered-and-wrong rate, mean cost, abstention rate)."""
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    conf = np.array([r.confidences for r in data], dtype=float)
    corr = np.array([r.correct for r in data], dtype=bool)
    cost = np.array([r.costs for r in data], dtype=float)
    return route_matrix(spec, t, conf, corr, cost)


def empirical_loss(perf: PerformanceVector, lambda_cost: float, lambda_abstain: float) -> float:
    """error + lambda_cost * cost + lambda_abstain * abstention."""
    if lambda_cost < 0 or lambda_abstain < 0:
        raise ValueError("preference parameters must be nonnegative")
    return perf.error + lambda_cost * perf.cost + lambda_abstain * perf.abstention


def dominates(a: PerformanceVector, b: PerformanceVector) -> bool:
    """True iff a is componentwise <= b with at least one strict inequality."""
    le = a.error <= b.error and a.cost <= b.cost and a.abstention <= b.abstention
    strict = a.error < b.error or a.cost < b.cost or a.abstention < b.abstention
    return le and strict


def pareto_front(points: Iterable[PerformanceVector]) -> list[PerformanceVector]:
    """Points not dominated by any other point, in stable input order.

    Duplicates of a nondominated point are all kept (equal vectors never
    dominate each other).
    """
    pts = list(points)
    return [p for p in pts if not any(dominates(q, p) for q in pts)]
