"""Logistic calibration of raw token-level confidence signals.

Raw signals p_raw in [0, 1] are mapped through the unbounded feature
f(p) = log(1 / (1 - p)) and a one-dimensional logistic regression turns
that feature into a calibrated correctness probability. The same fitter
backs the multi-feature abstention classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import expit

from .errors import DegenerateFitError

TRANSFORM_CLAMP = 1e-6  # keeps f finite at p_raw = 1
OUTPUT_CLAMP = 1e-4  # keeps downstream beta log-densities and quantile transforms finite
L2_PENALTY = 1e-4  # on slopes only; handles separable training sets
GRAD_TOL = 1e-8
MAX_ITER = 500


def transform_raw(p_raw, clamp_eps: float = TRANSFORM_CLAMP):
    """log(1 / (1 - p)) with p clamped into [clamp_eps, 1 - clamp_eps].

    Strictly increasing on the clamped interval; finite for all inputs.
    """
    p = np.clip(p_raw, clamp_eps, 1.0 - clamp_eps)
    return -np.log1p(-p)


@dataclass(frozen=True)
class CalibrationModel:
    """sigmoid(intercept + slope * f(p_raw)), clamped away from {0, 1}."""

    intercept: float
    slope: float
    clamp_eps: float = OUTPUT_CLAMP

    def __post_init__(self):
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError(f"clamp_eps {self.clamp_eps} outside (0, 0.5)")


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = L2_PENALTY,
    grad_tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> tuple[float, np.ndarray]:
    """Penalized maximum-likelihood logistic regression.

    Minimizes mean log-loss + (l2/2) * ||coef||^2 (intercept unpenalized)
    with L-BFGS until the projected gradient norm drops below grad_tol or
    max_iter iterations. Returns (intercept, coefficients).
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.shape[0] == 1 and np.ndim(features) == 1:
        X = X.T
    y = np.asarray(labels, dtype=float)
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError(f"labels shape {y.shape} does not match {n} rows")
    if np.all(y == y[0]):
        raise DegenerateFitError(
            "training labels contain a single class; cannot fit a logistic model"
        )

    def objective(w):
        b, coef = w[0], w[1:]
        z = b + X @ coef
        # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0, stably
        nll = np.mean((1.0 - y) * z + np.logaddexp(0.0, -z))
        p = expit(z)
        grad_z = (p - y) / n
        grad = np.empty(d + 1)
        grad[0] = grad_z.sum()
        grad[1:] = X.T @ grad_z + l2 * coef
        return nll + 0.5 * l2 * coef @ coef, grad

    res = optimize.minimize(
        objective,
        x0=np.zeros(d + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": grad_tol, "ftol": 0.0},
    )
    return float(res.x[0]), res.x[1:]


def fit_calibration(
    train: list[tuple[float, bool]], clamp_eps: float = TRANSFORM_CLAMP
) -> CalibrationModel:
    """Fit a calibration model from (p_raw, correct) pairs.

    Raises DegenerateFitError on single-class labels; callers may fall
    back to using the clipped raw signal directly.
    """
    if len(train) < 10:
        raise ValueError(f"need at least 10 training pairs, got {len(train)}")
    p_raw = np.array([p for p, _ in train], dtype=float)
    labels = np.array([bool(c) for _, c in train])
    feats = transform_raw(p_raw, clamp_eps)
    intercept, coef = fit_logistic(feats[:, None], labels)
    return CalibrationModel(intercept=intercept, slope=float(coef[0]))


def apply_calibration(model: CalibrationModel, p_raw):
    """Calibrated correctness probability, clamped into [clamp_eps, 1 - clamp_eps]."""
    z = model.intercept + model.slope * transform_raw(p_raw)
    return np.clip(expit(z), model.clamp_eps, 1.0 - model.clamp_eps)


def brier_score(probabilities, labels) -> float:
    """Mean squared difference between predicted probabilities and 0/1 labels."""
    p = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels, dtype=float)
    return float(np.mean((p - y) ** 2))
